//! `epsilon_g` against `k` for `k` copies of one mechanism, for plotting.

use dpcomp_core::rug::Rational;
use dpcomp_core::{CompositionInstance, Method, PrivacyParams};
use serde::{Deserialize, Serialize};

use crate::api::{decimal_string, parse_field, significant_string, solve, MethodChoice, Settings, TargetValue, Tuning};
use crate::error::ApiError;

/// Significant digits of `epsilon_g` in CSV output.
pub const CSV_DIGITS: usize = 12;

/// Largest number of `k` values in one request.
pub const MAX_CURVE_POINTS: usize = 10_000;

pub const CSV_HEADER: &str = "k,method,epsilon_g";

/// Curve parameters. These are also the query parameters of `GET /v1/curve`,
/// so every field is a plain string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRequest {
    pub eps: String,
    #[serde(default = "zero")]
    pub delta: String,
    pub delta_g: String,
    /// `start:stop:step` (inclusive), `start:stop`, or a single `k`.
    pub k_range: String,
    /// Comma-separated method names, in output order.
    pub methods: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_prime: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<u32>,
}

fn zero() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveRow {
    pub k: usize,
    pub method: Method,
    pub epsilon_g: String,
    /// `epsilon_g` with [`CSV_DIGITS`] significant digits.
    pub epsilon_g_csv: String,
    pub vacuous: bool,
    pub precision_bits: u32,
}

/// Parses `start:stop:step`, `start:stop` or `k` into the listed values of `k`.
pub fn parse_k_range(s: &str) -> Result<Vec<usize>, ApiError> {
    let bad = || ApiError::BadRequest(format!("k_range {s:?} is not start:stop:step with 1 <= start <= stop"));
    let parts: Vec<usize> = s
        .split(':')
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let (start, stop, step) = match parts[..] {
        [k] => (k, k, 1),
        [a, b] => (a, b, 1),
        [a, b, c] => (a, b, c),
        _ => return Err(bad()),
    };
    if start == 0 || stop < start || step == 0 {
        return Err(bad());
    }
    if (stop - start) / step >= MAX_CURVE_POINTS {
        return Err(ApiError::TooLarge(format!(
            "k_range has more than {MAX_CURVE_POINTS} points"
        )));
    }
    Ok((start..=stop).step_by(step).collect())
}

/// Rows ordered by `k` ascending, then by method in request order.
pub fn curve(req: &CurveRequest, settings: &Settings) -> Result<Vec<CurveRow>, ApiError> {
    let cfg = settings.precision_for(req.precision_bits)?;
    let params = PrivacyParams::new(parse_field("eps", &req.eps)?, parse_field("delta", &req.delta)?)?;
    let delta_g: Rational = parse_field("delta_g", &req.delta_g)?;
    let ks = parse_k_range(&req.k_range)?;
    let methods = MethodChoice::parse_list(&req.methods)?;
    let tuning = Tuning::parse(req.eta.as_deref(), req.delta_prime.as_deref())?;
    let target = TargetValue::DeltaG(delta_g);

    let mut rows = Vec::with_capacity(ks.len() * methods.len());
    for k in ks {
        let instance = CompositionInstance::homogeneous(params.clone(), k)?;
        for choice in &methods {
            let method = choice.resolve(k, &settings.limits);
            let solved = solve(&instance, &target, method, &tuning, &cfg, &settings.limits)?;
            let g = &solved.guarantee;
            rows.push(CurveRow {
                k,
                method,
                epsilon_g: decimal_string(&g.epsilon_g),
                epsilon_g_csv: significant_string(&g.epsilon_g, CSV_DIGITS),
                vacuous: g.vacuous,
                precision_bits: cfg.precision_bits,
            });
        }
    }
    Ok(rows)
}

/// CSV with a `k,method,epsilon_g` header and LF line endings.
pub fn to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{},{}\n", row.k, row.method, row.epsilon_g_csv));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(
            parse_k_range("100:700:100").unwrap(),
            vec![100, 200, 300, 400, 500, 600, 700]
        );
        assert_eq!(parse_k_range("3:5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_k_range("7").unwrap(), vec![7]);
        assert_eq!(parse_k_range("1:10:4").unwrap(), vec![1, 5, 9]);
        for bad in ["0:5", "5:3", "1:5:0", "a:b", "1:2:3:4", ""] {
            assert!(parse_k_range(bad).is_err(), "{bad}");
        }
        assert_eq!(parse_k_range("1:100000").unwrap_err().reason(), "too_large");
    }
}
