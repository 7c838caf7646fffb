//! Named parameter trees.
//!
//! Parameter records are generic over their leaf type: `T = Tensor` for
//! stored values and `T = Var` once bound onto a tape. The same record
//! layout therefore drives initialisation, the forward pass, gradient
//! collection, optimizer updates and serialization.

use crate::autodiff::{Gradients, Tape, Var};
use crate::tensor::Tensor;

pub trait ParamTree {
    type Elem;
    type Mapped<U>: ParamTree<Elem = U>;

    /// Maps every leaf, passing its dotted path.
    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &Self::Elem) -> U) -> Self::Mapped<U>;

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Self::Elem));
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl<E> ParamTree for Option<E>
where
    E: ParamTree,
{
    type Elem = E::Elem;
    type Mapped<U> = Option<E::Mapped<U>>;

    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &Self::Elem) -> U) -> Self::Mapped<U> {
        self.as_ref().map(|e| e.map_named(prefix, f))
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Self::Elem)) {
        if let Some(e) = self {
            e.visit_mut(prefix, f);
        }
    }
}

impl<E> ParamTree for Vec<E>
where
    E: ParamTree,
{
    type Elem = E::Elem;
    type Mapped<U> = Vec<E::Mapped<U>>;

    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &Self::Elem) -> U) -> Self::Mapped<U> {
        self.iter()
            .enumerate()
            .map(|(i, e)| e.map_named(&join(prefix, &i.to_string()), f))
            .collect()
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Self::Elem)) {
        for (i, e) in self.iter_mut().enumerate() {
            e.visit_mut(&join(prefix, &i.to_string()), f);
        }
    }
}

/// A single named leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf<T>(pub T);

impl<T> ParamTree for Leaf<T> {
    type Elem = T;
    type Mapped<U> = Leaf<U>;

    fn map_named<U>(&self, prefix: &str, f: &mut dyn FnMut(&str, &T) -> U) -> Leaf<U> {
        Leaf(f(prefix, &self.0))
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut T)) {
        f(prefix, &mut self.0)
    }
}

/// Places every tensor on `tape` as a differentiable leaf.
pub fn bind<P>(params: &P, tape: &mut Tape) -> P::Mapped<Var>
where
    P: ParamTree<Elem = Tensor>,
{
    params.map_named("", &mut |_, t| tape.param(t.clone()))
}

/// Places every tensor on `tape` as a constant (evaluation only).
pub fn bind_frozen<P>(params: &P, tape: &mut Tape) -> P::Mapped<Var>
where
    P: ParamTree<Elem = Tensor>,
{
    params.map_named("", &mut |_, t| tape.constant(t.clone()))
}

/// `(path, tensor)` pairs in traversal order.
pub fn flatten<P>(params: &P) -> Vec<(String, Tensor)>
where
    P: ParamTree<Elem = Tensor>,
{
    let mut out = Vec::new();
    params.map_named("", &mut |name, t| out.push((name.to_string(), t.clone())));
    out
}

/// Gradients of bound parameters, in the same traversal order as [`flatten`].
pub fn collect_grads<B>(bound: &B, grads: &Gradients) -> Vec<Tensor>
where
    B: ParamTree<Elem = Var>,
{
    let mut out = Vec::new();
    bound.map_named("", &mut |_, v| out.push(grads.get(*v)));
    out
}

pub fn param_count<P>(params: &P) -> usize
where
    P: ParamTree<Elem = Tensor>,
{
    let mut n = 0;
    params.map_named("", &mut |_, t| n += t.len());
    n
}
