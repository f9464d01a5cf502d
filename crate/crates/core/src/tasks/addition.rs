//! Multi-digit addition over digit concepts.

use crate::logic::LabelId;

pub const DIGIT_NAMES: [&str; 16] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen",
];

/// Program text: the addition and number rules followed by one digit rule per label.
pub fn source(base: u32, digits: usize) -> String {
    let mut text = format!("% {digits}-digit addition in base {base}\n");
    for name in &DIGIT_NAMES[..base as usize] {
        text.push_str(&format!("@concept {name}/1.\n"));
    }
    text.push_str("@target addition/3.\n\n");
    text.push_str("addition(Num1, Num2, Y) :- number(Num1, Res1), number(Num2, Res2), Y is Res1 + Res2.\n");
    text.push_str("number([], Res, Res).\n");
    text.push_str(&format!(
        "number([H|T], Acc, Res) :- digit(H, D), Acc1 is D + {base} * Acc, number(T, Acc1, Res).\n"
    ));
    text.push_str("number(X, N) :- number(X, 0, N).\n\n");
    for (value, name) in DIGIT_NAMES[..base as usize].iter().enumerate() {
        text.push_str(&format!("digit(Pos, {value}) :- {name}(Pos).\n"));
    }
    text
}

/// Big-endian digits of `n`, padded to `width`.
pub fn to_digits(mut n: i64, base: u32, width: usize) -> Vec<LabelId> {
    let mut out = vec![0; width];
    for slot in out.iter_mut().rev() {
        *slot = (n % base as i64) as LabelId;
        n /= base as i64;
    }
    out
}

pub fn from_digits(digits: &[LabelId], base: u32) -> i64 {
    digits.iter().fold(0, |acc, &d| acc * base as i64 + d as i64)
}

/// The sum encoded by a label sequence of two operands.
pub fn sum(labels: &[LabelId], base: u32) -> i64 {
    let (a, b) = labels.split_at(labels.len() / 2);
    from_digits(a, base) + from_digits(b, base)
}

/// Every operand pair with digits in `domain` summing to `y`, in
/// lexicographic label order.
pub fn decompositions(y: i64, base: u32, digits: usize, domain: &[bool]) -> Vec<Vec<LabelId>> {
    let max = (base as i64).pow(digits as u32) - 1;
    let mut out = Vec::new();
    if y < 0 || y > 2 * max {
        return out;
    }
    for first in (y - max).max(0)..=y.min(max) {
        let mut labels = to_digits(first, base, digits);
        labels.extend(to_digits(y - first, base, digits));
        if labels.iter().all(|&d| domain[d]) {
            out.push(labels);
        }
    }
    out
}
