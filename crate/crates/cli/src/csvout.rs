//! The closed, versioned CSV schema for study output.
//!
//! One row per (experiment, kernel, n). Floats print with 17 significant
//! digits so reruns with the same seed reproduce every byte; fields that a
//! study does not fill stay empty. Timestamps and wall times live in the
//! JSON manifest, never here.

use pchaos_core::bounds::BoundReport;

pub const SCHEMA_VERSION: &str = "pchaos-csv-1";

/// Column names, fixed order. Unknown columns never appear.
pub const HEADER: &[&str] = &[
    "experiment",
    "kernel",
    "n",
    "replications",
    "seed",
    "variance",
    "sigma2",
    "variance_gap",
    "middle_defect",
    "norm_c11",
    "norm_c21",
    "int_h4",
    "a1_exact",
    "a3_bound",
    "a4_bound",
    "a5",
    "final_bound",
    "max_form",
    "k_lin",
    "k_quad",
    "bn",
    "cn",
    "bn_depois",
    "cn_depois",
    "three_moment_residual",
    "contraction_max",
    "dz2_diag",
    "mean",
    "m2",
    "m3",
    "m4",
    "kolmogorov",
    "d3_lower",
    "mean_b",
    "m2_b",
    "kolmogorov_b",
    "cross_corr",
    "product_gap",
];

#[derive(Debug, Clone, Default)]
pub struct Row {
    pub experiment: String,
    pub kernel: String,
    pub n: f64,
    pub replications: u64,
    pub seed: u64,
    pub variance: Option<f64>,
    pub sigma2: Option<f64>,
    pub variance_gap: Option<f64>,
    pub middle_defect: Option<f64>,
    pub norm_c11: Option<f64>,
    pub norm_c21: Option<f64>,
    pub int_h4: Option<f64>,
    pub a1_exact: Option<f64>,
    pub a3_bound: Option<f64>,
    pub a4_bound: Option<f64>,
    pub a5: Option<f64>,
    pub final_bound: Option<f64>,
    pub max_form: Option<f64>,
    pub k_lin: Option<f64>,
    pub k_quad: Option<f64>,
    pub bn: Option<f64>,
    pub cn: Option<f64>,
    pub bn_depois: Option<f64>,
    pub cn_depois: Option<f64>,
    pub three_moment_residual: Option<f64>,
    pub contraction_max: Option<f64>,
    pub dz2_diag: Option<f64>,
    pub mean: Option<f64>,
    pub m2: Option<f64>,
    pub m3: Option<f64>,
    pub m4: Option<f64>,
    pub kolmogorov: Option<f64>,
    pub d3_lower: Option<f64>,
    pub mean_b: Option<f64>,
    pub m2_b: Option<f64>,
    pub kolmogorov_b: Option<f64>,
    pub cross_corr: Option<f64>,
    pub product_gap: Option<f64>,
}

/// 17-significant-digit float formatting (`.` decimal point).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

impl Row {
    pub fn new(experiment: &str, kernel: &str, n: f64, replications: u64, seed: u64) -> Self {
        Row {
            experiment: experiment.to_string(),
            kernel: kernel.to_string(),
            n,
            replications,
            seed,
            ..Row::default()
        }
    }

    /// Copy the bound-report fields shared across studies. Merges: fields
    /// the report did not fill are left untouched, so a row can combine a
    /// de Jong report with a Gamma-bound report.
    pub fn fill_bounds(&mut self, rep: &BoundReport) {
        fn merge(dst: &mut Option<f64>, src: Option<f64>) {
            if src.is_some() {
                *dst = src;
            }
        }
        self.variance = Some(rep.variance);
        merge(&mut self.sigma2, rep.sigma2);
        if let Some(nu) = rep.nu {
            self.variance_gap = Some((rep.variance - 2.0 * nu).abs());
        }
        merge(&mut self.middle_defect, rep.middle_defect);
        for &(r, l, v) in &rep.contraction_norms {
            match (r, l) {
                (1, 1) => self.norm_c11 = Some(v),
                (2, 1) => self.norm_c21 = Some(v),
                (2, 0) => self.int_h4 = Some(v * v),
                _ => {}
            }
        }
        merge(&mut self.a1_exact, rep.a1_exact);
        merge(&mut self.a3_bound, rep.a3_bound);
        merge(&mut self.a4_bound, rep.a4_bound);
        merge(&mut self.a5, rep.a5);
        merge(&mut self.final_bound, rep.final_bound);
        merge(&mut self.max_form, rep.max_form);
        merge(&mut self.k_lin, rep.k_lin);
        merge(&mut self.k_quad, rep.k_quad);
        merge(&mut self.bn, rep.bn);
        merge(&mut self.cn, rep.cn);
        merge(&mut self.bn_depois, rep.bn_depoissonized);
        merge(&mut self.cn_depois, rep.cn_depoissonized);
    }

    pub fn to_line(&self) -> String {
        let cells: Vec<String> = vec![
            self.experiment.clone(),
            self.kernel.clone(),
            fmt_float(self.n),
            self.replications.to_string(),
            self.seed.to_string(),
            opt(self.variance),
            opt(self.sigma2),
            opt(self.variance_gap),
            opt(self.middle_defect),
            opt(self.norm_c11),
            opt(self.norm_c21),
            opt(self.int_h4),
            opt(self.a1_exact),
            opt(self.a3_bound),
            opt(self.a4_bound),
            opt(self.a5),
            opt(self.final_bound),
            opt(self.max_form),
            opt(self.k_lin),
            opt(self.k_quad),
            opt(self.bn),
            opt(self.cn),
            opt(self.bn_depois),
            opt(self.cn_depois),
            opt(self.three_moment_residual),
            opt(self.contraction_max),
            opt(self.dz2_diag),
            opt(self.mean),
            opt(self.m2),
            opt(self.m3),
            opt(self.m4),
            opt(self.kolmogorov),
            opt(self.d3_lower),
            opt(self.mean_b),
            opt(self.m2_b),
            opt(self.kolmogorov_b),
            opt(self.cross_corr),
            opt(self.product_gap),
        ];
        debug_assert_eq!(cells.len(), HEADER.len());
        cells.join(",")
    }
}

/// Render a full CSV (header plus rows, sorted by (kernel, n) for stable
/// output regardless of scheduling).
pub fn render_csv(rows: &[Row]) -> String {
    let mut sorted: Vec<&Row> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (a.experiment.as_str(), a.kernel.as_str())
            .cmp(&(b.experiment.as_str(), b.kernel.as_str()))
            .then(a.n.partial_cmp(&b.n).expect("finite n"))
    });
    let mut out = String::new();
    out.push_str(&HEADER.join(","));
    out.push('\n');
    for r in sorted {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

/// Parse a rendered CSV back into (header, rows of cells); used by `rate`.
pub fn parse_csv(text: &str) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next()?.split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Some((header, rows))
}

/// Two-column plot-ready rate file.
pub fn render_rate_file(pairs: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for &(n, v) in pairs {
        out.push_str(&format!("{} {}\n", fmt_float(n), fmt_float(v)));
    }
    out
}
