//! English number phrases for 0..=1000 and their train/validation/test
//! splits.
//!
//! Grammar: lowercase, space separated; "and" follows "hundred" when a
//! nonzero remainder follows; tens and units are separate words
//! ("twenty one"); 0 is "zero" and 1000 is "one thousand".

use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;

use super::dataset::{Dataset, Regime};
use super::TaskError;
use crate::tensor::Tensor;

pub const LANGUAGE_MAX: u32 = 1000;
const TRAIN_SIZE: usize = 169;
const VALIDATION_SIZE: usize = 200;
const TEST_SIZE: usize = 631;

const SMALL: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
];
const TENS: [&str; 8] = [
    "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

/// Every token the grammar can produce, in a fixed order.
pub fn vocabulary() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = SMALL.to_vec();
    v.extend(TENS);
    v.extend(["hundred", "thousand", "and"]);
    v
}

fn below_hundred(n: u32, out: &mut Vec<&'static str>) {
    if n < 20 {
        out.push(SMALL[n as usize]);
    } else {
        out.push(TENS[(n / 10 - 2) as usize]);
        if n % 10 != 0 {
            out.push(SMALL[(n % 10) as usize]);
        }
    }
}

pub fn number_to_words(value: i64) -> Result<Vec<&'static str>, TaskError> {
    if !(0..=LANGUAGE_MAX as i64).contains(&value) {
        return Err(TaskError::OutOfRange(value));
    }
    let n = value as u32;
    let mut out = Vec::new();
    if n == 1000 {
        out.extend(["one", "thousand"]);
    } else if n >= 100 {
        out.extend([SMALL[(n / 100) as usize], "hundred"]);
        if n % 100 != 0 {
            out.push("and");
            below_hundred(n % 100, &mut out);
        }
    } else {
        below_hundred(n, &mut out);
    }
    Ok(out)
}

/// Vocabulary indices of the phrase for `value`.
pub fn phrase_ids(value: u32) -> Result<Vec<usize>, TaskError> {
    let vocab = vocabulary();
    Ok(number_to_words(value as i64)?
        .into_iter()
        .map(|w| vocab.iter().position(|v| *v == w).expect("grammar token in vocabulary"))
        .collect())
}

fn small_value(w: &str) -> Option<u32> {
    SMALL.iter().position(|s| *s == w).map(|i| i as u32)
}

fn tens_value(w: &str) -> Option<u32> {
    TENS.iter().position(|s| *s == w).map(|i| 20 + 10 * i as u32)
}

fn parse_below_hundred(tokens: &[&str]) -> Option<u32> {
    match tokens {
        [w] => small_value(w).or_else(|| tens_value(w)),
        [t, u] => Some(tens_value(t)? + small_value(u).filter(|&d| (1..10).contains(&d))?),
        _ => None,
    }
}

fn parse(tokens: &[&str]) -> Option<u32> {
    match tokens {
        ["one", "thousand"] => Some(1000),
        [h, "hundred", rest @ ..] => {
            let hundreds = small_value(h).filter(|&d| (1..10).contains(&d))? * 100;
            match rest {
                [] => Some(hundreds),
                ["and", tail @ ..] => Some(hundreds + parse_below_hundred(tail)?),
                _ => None,
            }
        }
        _ => parse_below_hundred(tokens),
    }
}

/// Inverse of [`number_to_words`]; only canonical phrases are accepted.
pub fn words_to_number<S: AsRef<str>>(tokens: &[S]) -> Result<u32, TaskError> {
    let words: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    let fail = || TaskError::Unparseable(words.join(" "));
    let n = parse(&words).ok_or_else(fail)?;
    if number_to_words(n as i64)? != words {
        return Err(fail());
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageSplits {
    pub train: Vec<u32>,
    pub validation: Vec<u32>,
    pub test: Vec<u32>,
    /// The one value in 0..=1000 left over once the three splits are filled.
    pub unused: Vec<u32>,
    pub vocab: Vec<&'static str>,
}

fn token_counts(values: &[u32], vocab: &[&str]) -> Vec<usize> {
    let mut counts = vec![0; vocab.len()];
    for &v in values {
        for id in phrase_ids(v).expect("value in range") {
            counts[id] += 1;
        }
    }
    counts
}

/// Train holds 0..=19 plus a seeded sample of larger values, repaired so
/// every token occurs in it; the rest is shuffled into validation and test.
pub fn build_language_splits<R: Rng + ?Sized>(rng: &mut R) -> LanguageSplits {
    let vocab = vocabulary();
    let mut pool: Vec<u32> = (20..=LANGUAGE_MAX).collect();
    pool.shuffle(rng);
    let extra = TRAIN_SIZE - 20;
    let mut train: Vec<u32> = (0..20).chain(pool.drain(..extra)).collect();

    loop {
        let counts = token_counts(&train, &vocab);
        let Some(missing) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let incoming = pool
            .iter()
            .position(|&v| phrase_ids(v).expect("in range").contains(&missing))
            .expect("every token occurs in some value");
        // drop a sampled value whose tokens all stay covered without it
        let outgoing = (20..train.len())
            .rev()
            .find(|&i| {
                phrase_ids(train[i])
                    .expect("in range")
                    .iter()
                    .all(|&id| counts[id] >= 2)
            })
            .expect("sampled values are redundant enough to swap");
        std::mem::swap(&mut train[outgoing], &mut pool[incoming]);
    }

    pool.shuffle(rng);
    let validation = pool[..VALIDATION_SIZE].to_vec();
    let test = pool[VALIDATION_SIZE..VALIDATION_SIZE + TEST_SIZE].to_vec();
    let unused = pool[VALIDATION_SIZE + TEST_SIZE..].to_vec();
    LanguageSplits {
        train,
        validation,
        test,
        unused,
        vocab,
    }
}

/// One-hot phrase encodings (`[tokens, vocab]` per example) grouped by
/// phrase length, shortest first, so each group batches cleanly.
pub fn language_dataset(values: &[u32], regime: Regime) -> Result<Vec<Dataset>, TaskError> {
    let width = vocabulary().len();
    let mut groups: BTreeMap<usize, Dataset> = BTreeMap::new();
    for &v in values {
        let ids = phrase_ids(v)?;
        let x = Tensor::from_fn(&[ids.len(), width], |i| if ids[i / width] == i % width { 1.0 } else { 0.0 });
        let d = groups.entry(ids.len()).or_insert_with(|| Dataset {
            inputs: Vec::new(),
            targets: Vec::new(),
            regime,
        });
        d.inputs.push(x);
        d.targets.push(v as f64);
    }
    Ok(groups.into_values().collect())
}
