//! Human-readable run summaries.

use std::fmt::Write;

use outreg_core::verify::Comparison;
use outreg_core::RunReport;

pub fn render(report: &RunReport) -> String {
    let mut s = String::new();
    let d = &report.dims;
    let syn = &report.synthesis;
    let _ = writeln!(s, "config    {}", &report.config_hash[..16]);
    let _ = writeln!(
        s,
        "dims      m={} p={} n_w={} ell={} T={} nu={} N={} nhat_w={}",
        d.m, d.p, d.n_w, d.ell, d.t, d.nu, d.n_cols, d.nhat_w
    );
    let _ = writeln!(s, "method    {:?}", report.factorization);
    let _ = writeln!(
        s,
        "sdp       {:?}, margin {:.4e}, {} Newton steps",
        syn.status, syn.margin, syn.newton_steps
    );
    if let Some(k) = &syn.k {
        let row: Vec<String> = k.iter().map(|v| format!("{v:.4}")).collect();
        let _ = writeln!(s, "K         [{}]", row.join(", "));
    }
    if let Some(rho) = report.spectral_radius {
        let _ = writeln!(s, "rho       {rho:.6}");
    }
    if let Some(reg) = &report.regulation {
        let _ = writeln!(
            s,
            "tail      max |y| = {:.3e} from k = {}",
            reg.tail_max_y, reg.tail_start
        );
    }
    for w in &report.precheck.warnings {
        let _ = writeln!(s, "warning   {w}");
    }
    for n in &report.precheck.notes {
        let _ = writeln!(s, "note      {n}");
    }
    let _ = writeln!(s, "checks");
    for c in &report.checks.checks {
        let op = match c.comparison {
            Comparison::Below => '<',
            Comparison::Above => '>',
        };
        let tag = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "  {tag} {:<34} {:>11.3e} {op} {:.1e}", c.name, c.value, c.threshold);
    }
    let failed = report.checks.checks.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        let _ = writeln!(s, "result    all {} checks pass", report.checks.checks.len());
    } else {
        let _ = writeln!(s, "result    {failed} of {} checks failed", report.checks.checks.len());
    }
    s
}
