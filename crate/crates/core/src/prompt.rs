//! Prompt rendering and numeric-answer extraction.
//!
//! One-dimensional tasks use the "number predictor" preamble with
//! `X: {x}, Y: {y}` lines; two- to four-dimensional tasks use the
//! "function approximator" preamble with `X0: .., X1: .., Y: {y}` lines.
//! The preamble is followed by a newline, one line per demonstration and a
//! final query line ending in `Y:` with no trailing newline.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::gp::Demo;

pub const NUMBER_PREDICTOR_PREAMBLE: &str = "You are a number predictor. I will give you a number, X, and then you need to predict a new number, Y. There may be noise in the true prediction. Your task is to provide your best estimate for Y. Provide that and only that, without any additional text.";

// Transcribed as published, including the double space and the missing verb.
pub const FUNCTION_APPROXIMATOR_PREAMBLE: &str = "You are a function approximator.  I will give you a set of input variables (X), and then you need to the output value (Y). There may be noise in the true prediction. Your task is to provide your best estimate for Y. Provide that and only that, without any additional text.";

pub const DEFAULT_DECIMALS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptText {
    pub text: String,
    pub n_demos: usize,
    pub dims: usize,
}

fn push_inputs(out: &mut String, x: &[f64], decimals: usize) {
    if let [v] = x {
        out.push_str(&format!("X: {v:.decimals$}"));
    } else {
        for (i, v) in x.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&format!("X{i}: {v:.decimals$}"));
        }
    }
}

pub fn render_prompt(demos: &[Demo], query: &[f64], dims: usize, decimals: usize) -> Result<PromptText> {
    if !(1..=4).contains(&dims) {
        return Err(Error::domain(format!("prompt dimension must be in 1..=4, got {dims}")));
    }
    let bad = |what: String, len: usize| Error::domain(format!("{what} has dimension {len}, expected {dims}"));
    if query.len() != dims {
        return Err(bad("query".into(), query.len()));
    }
    if let Some((i, d)) = demos.iter().enumerate().find(|(_, d)| d.x.len() != dims) {
        return Err(bad(format!("demonstration {i}"), d.x.len()));
    }

    let mut text = String::with_capacity(320 + demos.len() * 24 * dims);
    text.push_str(if dims == 1 {
        NUMBER_PREDICTOR_PREAMBLE
    } else {
        FUNCTION_APPROXIMATOR_PREAMBLE
    });
    text.push('\n');
    for d in demos {
        push_inputs(&mut text, &d.x, decimals);
        text.push_str(&format!(", Y: {:.decimals$}\n", d.y));
    }
    push_inputs(&mut text, query, decimals);
    text.push_str(", Y:");
    Ok(PromptText {
        text,
        n_demos: demos.len(),
        dims,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPrediction {
    pub value: Option<f64>,
    /// Byte range of the literal within the completion.
    pub matched_span: Option<Range<usize>>,
}

// Optional sign, digits with an optional decimal point, optional exponent.
static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?").expect("valid regex"));

/// The last numeric literal in `completion`, if any. Never fails.
pub fn parse_prediction(completion: &str) -> ParsedPrediction {
    match NUMBER.find_iter(completion).last() {
        Some(m) => ParsedPrediction {
            value: m.as_str().parse::<f64>().ok(),
            matched_span: Some(m.range()),
        },
        None => ParsedPrediction {
            value: None,
            matched_span: None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dim_no_demos() {
        let p = render_prompt(&[], &[1.0], 1, 3).unwrap();
        assert_eq!(p.text, format!("{NUMBER_PREDICTOR_PREAMBLE}\nX: 1.000, Y:"));
        assert_eq!(p.n_demos, 0);
    }

    #[test]
    fn two_dim_fields() {
        let demos = [Demo::new(vec![0.5, 2.25], -0.125)];
        let p = render_prompt(&demos, &[1.0, 3.0], 2, 3).unwrap();
        assert!(p.text.contains("function approximator"));
        assert!(p.text.contains("\nX0: 0.500, X1: 2.250, Y: -0.125\n"));
        assert!(p.text.ends_with("X0: 1.000, X1: 3.000, Y:"));
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(render_prompt(&[], &[1.0; 5], 5, 3).is_err());
        assert!(render_prompt(&[], &[1.0], 0, 3).is_err());
        assert!(render_prompt(&[Demo::new(vec![1.0, 2.0], 0.0)], &[1.0], 1, 3).is_err());
        assert!(render_prompt(&[], &[1.0, 2.0], 1, 3).is_err());
    }

    #[test]
    fn y_field_count() {
        let demos: Vec<Demo> = (0..7).map(|i| Demo::new(vec![i as f64, 1.0, 2.0], 0.1 * i as f64)).collect();
        let p = render_prompt(&demos, &[9.0, 9.0, 9.0], 3, 3).unwrap();
        assert_eq!(p.text.matches(", Y: ").count(), 7);
        assert!(p.text.ends_with(", Y:"));
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_prediction("0.42").value, Some(0.42));
        assert_eq!(
            parse_prediction("it could be 3 but I predict -1.5e-2").value,
            Some(-0.015)
        );
        let none = parse_prediction("no idea");
        assert_eq!(none.value, None);
        assert_eq!(none.matched_span, None);
        assert_eq!(parse_prediction("Y: +7.").value, Some(7.0));
        assert_eq!(parse_prediction("about .5").value, Some(0.5));
        assert_eq!(parse_prediction("X: 1.000, Y: 0.250").matched_span, Some(13..18));
        assert_eq!(parse_prediction("1e999").value, Some(f64::INFINITY));
        // Exponent without digits is not part of the literal.
        assert_eq!(parse_prediction("2e").value, Some(2.0));
        // Non-ASCII digits are not numbers.
        assert_eq!(parse_prediction("٣").value, None);
    }
}
