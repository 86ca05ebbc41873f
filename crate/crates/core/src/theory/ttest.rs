use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theory::special::student_t_two_sided;

/// Welch's unequal-variance t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate(format!(
            "each sample needs at least 2 values, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Degenerate(
            "samples contain non-finite values".into(),
        ));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let sa = va / a.len() as f64;
    let sb = vb / b.len() as f64;
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    Ok(WelchTest {
        t,
        df,
        p_value: student_t_two_sided(t, df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identical_samples() {
        let r = welch_t_test(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert!(close(r.p_value, 1.0, 1e-15));
    }

    #[test]
    fn gross_separation() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        let r = welch_t_test(&a, &b).unwrap();
        assert!(r.p_value < 1e-4);
        // scipy.stats.ttest_ind(equal_var=False)
        assert!(close(r.t, -10.0, 1e-12));
        assert!(close(r.df, 8.0, 1e-12));
        assert!(close(r.p_value, 8.488_181_527_628_5e-6, 1e-12));
    }

    #[test]
    fn reference_values() {
        // (a, b, t, p, df) from scipy.stats.ttest_ind(a, b, equal_var=False).
        let cases: [(&[f64], &[f64], f64, f64, f64); 3] = [
            (
                &[2.1, 2.5, 2.3],
                &[2.2, 2.4],
                0.0,
                1.0,
                2.882_352_941_176_47,
            ),
            (
                &[1.2, 3.4, 2.2, 5.1, 0.3],
                &[2.0, 2.9, 3.1, 3.3, 2.7, 4.0],
                -0.633_290_777_311_802_2,
                0.555_313_327_410_861_9,
                4.829_385_467_855_991_5,
            ),
            (
                &[10.1, 9.8, 10.4, 10.0],
                &[9.1, 9.5, 9.3, 8.9, 9.2],
                5.466_081_666_101_214,
                0.001_425_639_575_293_238_4,
                6.172_582_619_339_047,
            ),
        ];
        for (a, b, t, p, df) in cases {
            let r = welch_t_test(a, b).unwrap();
            assert!(close(r.t, t, 1e-6), "t {} vs {t}", r.t);
            assert!(close(r.p_value, p, 1e-6), "p {} vs {p}", r.p_value);
            assert!(close(r.df, df, 1e-6), "df {} vs {df}", r.df);
        }
    }

    #[test]
    fn degenerate_samples() {
        assert!(matches!(
            welch_t_test(&[1.0], &[1.0, 2.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            welch_t_test(&[3.0, 3.0], &[3.0, 3.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
    }
}
