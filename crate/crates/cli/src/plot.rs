//! Loss curves as CSV plus a gnuplot script that draws them.

use std::path::Path;

use egodepth::optimize::{AblationReport, Trace};

use crate::CliError;

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| {
        CliError::Run(egodepth::Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

pub const TRACE_COLUMNS: [&str; 6] = [
    "iteration",
    "combined",
    "reconstruction",
    "alignment_3d",
    "ssim",
    "smoothness",
];

pub fn trace_csv(trace: &Trace) -> String {
    let mut s = TRACE_COLUMNS.join(",");
    s.push('\n');
    for e in &trace.entries {
        let t = &e.totals;
        s += &format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            e.iteration, e.combined, t.reconstruction, t.alignment_3d, t.ssim, t.smoothness
        );
    }
    s
}

fn curves_script(csv: &str, png: &str, title: &str) -> String {
    let mut s = format!(
        "# gnuplot {png}.gp\nset datafile separator ','\nset key autotitle columnhead\n\
         set terminal pngcairo size 900,600\nset output '{png}'\nset title '{title}'\n\
         set xlabel 'iteration'\nset ylabel 'loss'\nset logscale y\nplot "
    );
    let plots: Vec<String> = (2..=TRACE_COLUMNS.len())
        .map(|c| format!("'{csv}' using 1:{c} with lines"))
        .collect();
    s += &plots.join(", \\\n     ");
    s.push('\n');
    s
}

/// Writes `trace.csv` and `loss.gp` into `dir`.
pub fn emit_trace(dir: &Path, trace: &Trace) -> Result<(), CliError> {
    write(&dir.join("trace.csv"), &trace_csv(trace))?;
    write(
        &dir.join("loss.gp"),
        &curves_script("trace.csv", "loss.png", "loss vs iteration"),
    )
}

/// Writes `ablation.csv` (one row per run) and a bar-chart `ablation.gp`.
pub fn emit_ablation(dir: &Path, report: &AblationReport) -> Result<(), CliError> {
    let mut s = String::from(
        "run,disabled,iterations,final_loss,depth_error_prev,depth_error_cur,rotation_deg,translation\n",
    );
    let row = |name: &str,
               disabled: &str,
               it: usize,
               loss: f64,
               e: &egodepth::optimize::EstimateErrors| {
        format!(
            "{name},{disabled},{it},{loss:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            e.depth_prev, e.depth_cur, e.rotation_deg, e.translation
        )
    };
    s += &row("initial", "", 0, f64::NAN, &report.initial);
    for r in &report.runs {
        let names: Vec<&str> = r.disabled.iter().map(|t| t.name()).collect();
        let label = if names.is_empty() {
            "full".to_string()
        } else {
            format!("no-{}", names.join("+"))
        };
        s += &row(
            &label,
            &names.join("+"),
            r.iterations,
            r.final_loss,
            &r.errors,
        );
    }
    write(&dir.join("ablation.csv"), &s)?;
    write(
        &dir.join("ablation.gp"),
        "# gnuplot ablation.gp\nset datafile separator ','\nset terminal pngcairo size 900,600\n\
         set output 'ablation.png'\nset title 'final depth error by run'\nset style data histograms\n\
         set style fill solid 0.6\nset ylabel 'mean relative depth error'\n\
         plot 'ablation.csv' using 5:xtic(1) title 'frame t-1', '' using 6 title 'frame t'\n",
    )
}
