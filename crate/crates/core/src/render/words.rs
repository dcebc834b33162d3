//! English cardinal numbers: `47` ↔ `"forty-seven"`.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};

pub(crate) const ONES: [&str; 20] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];

pub(crate) const TENS: [&str; 10] =
    ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

// Index i names 1000^(i+1).
pub(crate) const SCALES: [&str; 10] = [
    "thousand",
    "million",
    "billion",
    "trillion",
    "quadrillion",
    "quintillion",
    "sextillion",
    "septillion",
    "octillion",
    "nonillion",
];

/// Exclusive upper bound of [`to_words`]: 10^33.
pub const WORDS_LIMIT: u128 = 1_000_000_000_000_000_000_000_000_000_000_000;

fn below_thousand(n: u32, out: &mut Vec<String>) {
    debug_assert!(n < 1000);
    let (h, rest) = (n / 100, n % 100);
    if h > 0 {
        out.push(ONES[h as usize].to_string());
        out.push("hundred".to_string());
    }
    if rest == 0 {
        return;
    }
    if rest < 20 {
        out.push(ONES[rest as usize].to_string());
    } else if rest % 10 == 0 {
        out.push(TENS[(rest / 10) as usize].to_string());
    } else {
        out.push(format!("{}-{}", TENS[(rest / 10) as usize], ONES[(rest % 10) as usize]));
    }
}

/// American English cardinal: hyphenated tens-units, no "and".
pub fn to_words(n: u128) -> Result<String> {
    if n >= WORDS_LIMIT {
        return Err(Error::invalid(format!("{n} is outside the number-word range (< 10^33)")));
    }
    if n == 0 {
        return Ok("zero".to_string());
    }
    let mut groups = Vec::new();
    let mut m = n;
    while m > 0 {
        groups.push((m % 1000) as u32);
        m /= 1000;
    }
    let mut out = Vec::new();
    for (i, &g) in groups.iter().enumerate().rev() {
        if g == 0 {
            continue;
        }
        below_thousand(g, &mut out);
        if i > 0 {
            out.push(SCALES[i - 1].to_string());
        }
    }
    Ok(out.join(" "))
}

pub fn to_words_big(n: &BigUint) -> Result<String> {
    match n.to_u128() {
        Some(v) => to_words(v),
        None => Err(Error::invalid(format!("{n} is outside the number-word range (< 10^33)"))),
    }
}

fn small_value(w: &str) -> Option<u32> {
    ONES.iter().position(|&x| x == w).map(|i| i as u32)
}

fn tens_value(w: &str) -> Option<u32> {
    TENS.iter().position(|&x| !x.is_empty() && x == w).map(|i| i as u32 * 10)
}

fn scale_index(w: &str) -> Option<usize> {
    SCALES.iter().position(|&x| x == w)
}

// Parse one group ("four hundred ninety-nine") from `words`; returns the
// value (< 1000) and the number of words consumed.
fn parse_group(words: &[&str]) -> Option<(u32, usize)> {
    let mut i = 0;
    let mut value = 0;
    if let (Some(&w), Some(&"hundred")) = (words.first(), words.get(1)) {
        let h = small_value(w).filter(|&v| (1..10).contains(&v))?;
        value = h * 100;
        i = 2;
    }
    match words.get(i) {
        Some(w) if w.contains('-') => {
            let (t, u) = w.split_once('-')?;
            let t = tens_value(t)?;
            let u = small_value(u).filter(|&v| (1..10).contains(&v))?;
            value += t + u;
            i += 1;
        }
        Some(w) => {
            if let Some(t) = tens_value(w) {
                value += t;
                i += 1;
            } else if let Some(v) = small_value(w).filter(|&v| v > 0) {
                value += v;
                i += 1;
            }
        }
        None => {}
    }
    (i > 0).then_some((value, i))
}

/// Inverse of [`to_words`]. Accepts only the canonical form (modulo case,
/// surrounding whitespace and an optional "and" between groups).
pub fn parse_words(text: &str) -> Option<u128> {
    let lowered = text.trim().to_ascii_lowercase();
    let words: Vec<&str> = lowered.split_whitespace().filter(|w| *w != "and").collect();
    if words.is_empty() {
        return None;
    }
    if words == ["zero"] {
        return Some(0);
    }
    let mut total: u128 = 0;
    let mut i = 0;
    let mut last_scale = usize::MAX;
    while i < words.len() {
        let (g, used) = parse_group(&words[i..])?;
        if g == 0 {
            return None;
        }
        i += used;
        match words.get(i).and_then(|w| scale_index(w)) {
            Some(s) => {
                if s >= last_scale {
                    return None;
                }
                last_scale = s;
                total += g as u128 * 1000u128.pow(s as u32 + 1);
                i += 1;
            }
            None => {
                if i != words.len() {
                    return None;
                }
                total += g as u128;
            }
        }
    }
    Some(total)
}

/// Lower-case word tokens of a number-word utterance, split on spaces and
/// hyphens with punctuation removed.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c == '-')
        .map(|w| w.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: spell digit by digit from the decimal string in
    // groups of three, with its own tables.
    fn oracle(n: u128) -> String {
        if n == 0 {
            return "zero".into();
        }
        let units = ["", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];
        let teens = [
            "ten",
            "eleven",
            "twelve",
            "thirteen",
            "fourteen",
            "fifteen",
            "sixteen",
            "seventeen",
            "eighteen",
            "nineteen",
        ];
        let tens = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];
        let scales = [
            "",
            " thousand",
            " million",
            " billion",
            " trillion",
            " quadrillion",
            " quintillion",
            " sextillion",
            " septillion",
            " octillion",
            " nonillion",
        ];
        let s = n.to_string();
        let pad = (3 - s.len() % 3) % 3;
        let s = format!("{}{}", "0".repeat(pad), s);
        let chunks: Vec<&[u8]> = s.as_bytes().chunks(3).collect();
        let k = chunks.len();
        let mut parts = Vec::new();
        for (idx, c) in chunks.iter().enumerate() {
            let (h, t, u) = ((c[0] - b'0') as usize, (c[1] - b'0') as usize, (c[2] - b'0') as usize);
            if h + t + u == 0 {
                continue;
            }
            let mut p = String::new();
            if h > 0 {
                p.push_str(units[h]);
                p.push_str(" hundred");
            }
            let tail = match (t, u) {
                (0, 0) => String::new(),
                (0, u) => units[u].to_string(),
                (1, u) => teens[u].to_string(),
                (t, 0) => tens[t].to_string(),
                (t, u) => format!("{}-{}", tens[t], units[u]),
            };
            if !tail.is_empty() {
                if !p.is_empty() {
                    p.push(' ');
                }
                p.push_str(&tail);
            }
            p.push_str(scales[k - 1 - idx]);
            parts.push(p);
        }
        parts.join(" ")
    }

    #[test]
    fn known_values() {
        assert_eq!(to_words(47).unwrap(), "forty-seven");
        assert_eq!(to_words(0).unwrap(), "zero");
        assert_eq!(to_words(2499).unwrap(), "two thousand four hundred ninety-nine");
        assert_eq!(to_words(2499).unwrap(), oracle(2499));
        assert_eq!(to_words(1_000_000).unwrap(), "one million");
        assert_eq!(to_words(110).unwrap(), "one hundred ten");
        assert_eq!(to_words(36).unwrap(), "thirty-six");
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(to_words(WORDS_LIMIT).is_err());
        assert!(to_words(WORDS_LIMIT - 1).is_ok());
    }

    #[test]
    fn agrees_with_oracle_and_round_trips() {
        for n in (0..20_000u128).chain([999_999, 1_000_001, 10u128.pow(32) + 7]) {
            let w = to_words(n).unwrap();
            assert_eq!(w, oracle(n), "{n}");
            assert_eq!(parse_words(&w), Some(n), "{w}");
        }
    }

    #[test]
    fn parser_rejects_malformed() {
        for bad in [
            "",
            "hundred",
            "thousand million",
            "one thousand one thousand",
            "forty-zero",
            "ten-one",
            "banana",
            "one million two billion",
        ] {
            assert_eq!(parse_words(bad), None, "{bad:?}");
        }
        assert_eq!(parse_words("One Hundred and Five"), Some(105));
    }

    #[test]
    fn tokens_split_hyphens() {
        assert_eq!(
            word_tokens("What is forty-seven times thirty-six?"),
            ["what", "is", "forty", "seven", "times", "thirty", "six"]
        );
    }
}
