//! Text rendering of a theory scenario evaluation.

use std::fmt::Write;

use activetest::theory::input::{TheoryInput, TheoryReport};
use anyhow::Result;

pub fn evaluate(text: &str) -> Result<TheoryReport> {
    Ok(TheoryInput::parse(text)?.evaluate()?)
}

fn support(weights: &[f64]) -> String {
    let parts: Vec<String> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, w)| format!("{i}:{w:.6}"))
        .collect();
    parts.join(" ")
}

pub fn render(report: &TheoryReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "class prior P(Z=0)         {:.12}", report.prior0);
    let _ = writeln!(
        s,
        "mutual information I(S;Z)  {:.12}",
        report.mutual_information
    );
    let _ = writeln!(
        s,
        "relative entropy variance  {:.12}",
        report.relative_entropy_variance
    );
    let _ = writeln!(s, "target prior u             {:.12}", report.u);
    let _ = writeln!(
        s,
        "LP optimum                 {:.12}",
        report.lp.mutual_information
    );
    let _ = writeln!(
        s,
        "  weights                  {}",
        support(report.lp.scenario.weights())
    );
    let _ = writeln!(
        s,
        "bimodal closed form        {:.12}",
        report.closed_form.mutual_information
    );
    let _ = writeln!(
        s,
        "  support                  {} {}{}",
        report.closed_form.support.0,
        report.closed_form.support.1,
        if report.closed_form.degenerate {
            " (degenerate)"
        } else {
            ""
        }
    );
    let _ = writeln!(
        s,
        "  |LP - closed form|       {:.3e}",
        (report.lp.mutual_information - report.closed_form.mutual_information).abs()
    );
    match &report.bounds {
        None => {
            let _ = writeln!(
                s,
                "power bounds               (needs model posterior and cell columns)"
            );
        }
        Some(b) => {
            for (i, c) in b.cells.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "cell {i}: mass {:.6} prior {:.6} I {:.9} KL2(q|p) {:.9} KL2(p|q) {:.9} V {:.9}",
                    c.mass,
                    c.prior0,
                    c.mutual_information,
                    c.kl2_q_from_p,
                    c.kl2_p_from_q,
                    c.relative_entropy_variance
                );
            }
            let i = &b.inputs;
            let _ = writeln!(s, "alpha {} nq {}", i.alpha, i.nq);
            let _ = writeln!(
                s,
                "I {:.9} delta {:.9} eps1 {:.9} eps2 {:.9} sigma {:.9}",
                i.mutual_information, i.delta, i.eps1, i.eps2, i.sigma
            );
            let _ = writeln!(s, "power bound, partition query  {:.9}", b.proposed);
            let _ = writeln!(s, "power bound, random query     {:.9}", b.baseline);
        }
    }
    s
}
