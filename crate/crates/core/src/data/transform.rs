//! Stationarity transformations indexed by the FRED-QD transformation codes.

use crate::error::{Error, Result};

/// Number of leading observations a code consumes. Code 7 differences a growth
/// rate, so it reaches back two quarters.
pub fn diff_order(code: u8) -> usize {
    match code {
        2 | 5 => 1,
        3 | 6 | 7 => 2,
        _ => 0,
    }
}

pub fn is_valid_code(code: u8) -> bool {
    (1..=7).contains(&code)
}

/// Index of the first offending observation and a reason.
pub(crate) type Fault = (usize, String);

pub(crate) fn transform_raw(x: &[f64], code: u8) -> std::result::Result<Vec<f64>, Fault> {
    if !is_valid_code(code) {
        return Err((0, format!("unknown transformation code {code}")));
    }
    let order = diff_order(code);
    if x.len() <= order {
        return Err((
            0,
            format!("code {code} needs more than {order} observations"),
        ));
    }
    let logged = if matches!(code, 4..=6) {
        let mut v = Vec::with_capacity(x.len());
        for (i, &xi) in x.iter().enumerate() {
            if xi.is_finite() && xi <= 0.0 {
                return Err((i, format!("non-positive value {xi} under log code {code}")));
            }
            v.push(xi.ln());
        }
        v
    } else {
        x.to_vec()
    };
    let d1 = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    Ok(match code {
        1 | 4 => logged,
        2 | 5 => d1(&logged),
        3 | 6 => d1(&d1(&logged)),
        7 => {
            let g: Vec<f64> = x.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
            d1(&g)
        }
        _ => unreachable!(),
    })
}

/// Applies a transformation code; the output is trimmed of undefined leading entries.
///
/// Code 7 is the first difference of the gross growth rate `x_t / x_{t-1} - 1`.
pub fn apply_transform(series: &[f64], code: u8) -> Result<Vec<f64>> {
    transform_raw(series, code).map_err(|(i, reason)| Error::Transform {
        series: "<unnamed>".into(),
        date: format!("observation {i}"),
        reason,
    })
}

/// Annualized h-quarter inflation `(400/h) ln(P_{t+h}/P_t)`.
pub fn build_target(prices: &[f64], h: usize) -> Result<Vec<f64>> {
    if h == 0 || h >= prices.len() {
        return Err(Error::EmptyTarget {
            horizon: h,
            len: prices.len(),
        });
    }
    if let Some((i, p)) = prices
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.is_finite() && **p > 0.0))
    {
        return Err(Error::Transform {
            series: "<target>".into(),
            date: format!("observation {i}"),
            reason: format!("price level {p} is not strictly positive"),
        });
    }
    let scale = 400.0 / h as f64;
    Ok((0..prices.len() - h)
        .map(|t| scale * (prices[t + h] / prices[t]).ln())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_code() {
        assert_eq!(
            apply_transform(&[5.0, 5.0, 5.0], 1).unwrap(),
            vec![5.0, 5.0, 5.0]
        );
    }

    #[test]
    fn first_difference() {
        assert_eq!(
            apply_transform(&[1.0, 3.0, 6.0], 2).unwrap(),
            vec![2.0, 3.0]
        );
    }

    #[test]
    fn log_difference_of_exponentials() {
        let e = std::f64::consts::E;
        let out = apply_transform(&[e, e * e, e.powi(4)], 5).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-12 && (out[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn second_differences_and_growth() {
        assert_eq!(
            apply_transform(&[1.0, 3.0, 6.0, 10.0], 3).unwrap(),
            vec![1.0, 1.0]
        );
        let g = apply_transform(&[1.0, 2.0, 3.0, 6.0], 7).unwrap();
        // growth rates 1.0, 0.5, 1.0
        assert_eq!(g, vec![-0.5, 0.5]);
    }

    #[test]
    fn log_code_rejects_nonpositive() {
        let err = apply_transform(&[1.0, 0.0, 2.0], 5).unwrap_err();
        assert!(matches!(err, Error::Transform { .. }));
        assert!(apply_transform(&[1.0, -1.0], 4).is_err());
    }

    #[test]
    fn target_examples() {
        let p = [1.0, 1.0, 1.0, 1.0, 0.02f64.exp()];
        assert!((build_target(&p, 4).unwrap()[0] - 2.0).abs() < 1e-12);
        assert!(build_target(&[3.0; 6], 2)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        let d = build_target(&[1.0, 2.0], 1).unwrap()[0];
        assert!((d - 277.258_872_223_978_1).abs() < 1e-9);
        assert!(matches!(
            build_target(&[1.0, 2.0], 2),
            Err(Error::EmptyTarget { .. })
        ));
    }

    proptest! {
        #[test]
        fn output_length_drops_by_order(
            xs in proptest::collection::vec(0.1f64..100.0, 3..40),
            code in 1u8..=7,
        ) {
            let out = apply_transform(&xs, code).unwrap();
            prop_assert_eq!(out.len(), xs.len() - diff_order(code));
        }

        #[test]
        fn target_is_scale_invariant(
            xs in proptest::collection::vec(0.1f64..100.0, 6..30),
            c in 0.01f64..100.0,
            h in 1usize..5,
        ) {
            let a = build_target(&xs, h).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            let b = build_target(&scaled, h).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
