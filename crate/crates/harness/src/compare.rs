//! Side-by-side residual reports for several solutions of one problem.

use std::fmt;

use conic_split::{residuals, ConicProgram, ResidualReport, Solution, SubspaceProjector};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub report: ResidualReport,
    pub primal_obj: f64,
    /// Cone distance above `1e-12·max(1, ‖x‖)`.
    pub outside_cone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// Strictly better primal residual and gap than every other entry.
    Dominant(usize),
    /// Every entry has identical primal residual and gap.
    Tie,
    NoneDominant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub entries: Vec<Entry>,
    pub verdict: Verdict,
}

pub fn compare(
    program: &ConicProgram,
    projector: &SubspaceProjector,
    solutions: &[(String, Solution)],
) -> Comparison {
    let entries: Vec<Entry> = solutions
        .iter()
        .map(|(name, s)| {
            let report = residuals(program, projector, &s.x, &s.z);
            let limit = 1e-12 * s.x.norm().max(1.0);
            Entry {
                name: name.clone(),
                outside_cone: report.cone_dist_x > limit || report.cone_dist_z > limit,
                primal_obj: program.c.dot(&s.x),
                report,
            }
        })
        .collect();
    let key = |e: &Entry| (e.report.primal_res, e.report.gap);
    let verdict = if entries.windows(2).all(|w| key(&w[0]) == key(&w[1])) {
        Verdict::Tie
    } else {
        (0..entries.len())
            .find(|&i| {
                let (p, g) = key(&entries[i]);
                entries
                    .iter()
                    .enumerate()
                    .all(|(j, e)| j == i || (p < e.report.primal_res && g < e.report.gap))
            })
            .map_or(Verdict::NoneDominant, Verdict::Dominant)
    };
    Comparison { entries, verdict }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<24} {:>12} {:>12} {:>12} {:>12} {:>12} {:>16}  flags",
            "solution", "primal_res", "dual_res", "gap", "cone_dist_x", "cone_dist_z", "primal_obj"
        )?;
        for e in &self.entries {
            let r = &e.report;
            writeln!(
                f,
                "{:<24} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e} {:>16.9e}  {}",
                e.name,
                r.primal_res,
                r.dual_res,
                r.gap,
                r.cone_dist_x,
                r.cone_dist_z,
                e.primal_obj,
                if e.outside_cone { "OUTSIDE-CONE" } else { "" }
            )?;
        }
        match self.verdict {
            Verdict::Dominant(i) => write!(f, "dominant: {}", self.entries[i].name),
            Verdict::Tie => write!(f, "tie"),
            Verdict::NoneDominant => write!(f, "no solution dominates"),
        }
    }
}
