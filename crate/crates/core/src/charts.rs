//! Registry of named builtin charts.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Domain, MetricChart};

pub const BUILTIN_CHARTS: &[&str] = &["flat:n", "sphere:r", "half-plane", "polar"];

/// Looks up `"flat:n"`, `"sphere:r"`, `"half-plane"` or `"polar"`.
pub fn builtin_chart(name: &str) -> Result<MetricChart> {
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    let unknown = || Error::Config(format!("unknown builtin chart `{name}`"));
    match (head, arg) {
        ("flat", Some(a)) => {
            let n: usize = a.trim().parse().map_err(|_| unknown())?;
            if n == 0 {
                return Err(Error::Dimension("flat chart needs n ≥ 1".into()));
            }
            Ok(MetricChart::flat(n))
        }
        ("sphere", Some(a)) => {
            let r: f64 = a.trim().parse().map_err(|_| unknown())?;
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("sphere radius must be positive, got {a}")));
            }
            let r2 = format!("{r:?}^2");
            MetricChart::parse(
                name,
                vec!["theta".into(), "phi".into()],
                Domain {
                    lo: vec![0.0, f64::NEG_INFINITY],
                    hi: vec![PI, f64::INFINITY],
                },
                &[
                    vec![r2.clone(), "0".into()],
                    vec!["0".into(), format!("{r2}*sin(theta)^2")],
                ],
            )
        }
        ("half-plane", None) => MetricChart::parse(
            name,
            vec!["x".into(), "y".into()],
            Domain {
                lo: vec![f64::NEG_INFINITY, 0.0],
                hi: vec![f64::INFINITY, f64::INFINITY],
            },
            &[
                vec!["1/y^2".into(), "0".into()],
                vec!["0".into(), "1/y^2".into()],
            ],
        ),
        ("polar", None) => MetricChart::parse(
            name,
            vec!["r".into(), "theta".into()],
            Domain {
                lo: vec![0.0, f64::NEG_INFINITY],
                hi: vec![f64::INFINITY, f64::INFINITY],
            },
            &[vec!["1".into(), "0".into()], vec!["0".into(), "r^2".into()]],
        ),
        _ => Err(unknown()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        assert_eq!(builtin_chart("flat:3").unwrap().dim(), 3);
        assert_eq!(builtin_chart("sphere:2").unwrap().dim(), 2);
        assert!(builtin_chart("torus").is_err());
        assert!(builtin_chart("sphere:-1").is_err());
        assert!(builtin_chart("half-plane").unwrap().metric_at(&[0.0, -1.0]).is_err());
    }
}
