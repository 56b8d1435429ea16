//! Figure reproduction: each panel becomes a CSV (the contract) plus a
//! best-effort SVG rendering.

use anyhow::bail;

use qspect_core::configurations::GainSpec;
use qspect_core::qfi::{dl_numeric_qfi_kappa, dl_point_moments, Access, Estimand};
use qspect_core::sweep::{
    crossover, emit_csv, run_sweep, Model, Quantity, RowFlag, SweepConfig, SweepResult, SweepRow,
};

use crate::plot::{line_plot, Series};

/// Fit constant of the approximate DL QFI overlay.
const ALPHA_FIT: f64 = 1.1;

pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

fn panel_sweep(
    base: &SweepConfig,
    model: Model,
    access: Access,
    quantity: Quantity,
) -> SweepConfig {
    let mut cfg = base.clone();
    cfg.model = model;
    cfg.access = access;
    cfg.quantity = quantity;
    cfg.estimand = Estimand::KappaI;
    cfg
}

/// log10 ratio of two sweeps on the same grid, row by row.
fn log_ratio(a: &SweepResult, b: &SweepResult, label: &str) -> anyhow::Result<SweepResult> {
    // Reuse the grid check from crossover.
    crossover(a, b)?;
    let rows = a
        .rows
        .iter()
        .zip(&b.rows)
        .map(|(ra, rb)| {
            let value = (ra.value / rb.value).log10();
            SweepRow {
                value,
                flag: if value.is_finite() { RowFlag::Ok } else { RowFlag::Divergent },
                ..*ra
            }
        })
        .collect();
    Ok(SweepResult {
        meta: vec![("quantity".into(), format!("log10_ratio {label}"))],
        rows,
    })
}

fn per_gain_series(res: &SweepResult) -> Vec<Series> {
    let mut gains: Vec<f64> = res.rows.iter().map(|r| r.gain).collect();
    gains.dedup();
    gains
        .into_iter()
        .map(|g| Series {
            label: format!("N_peak = {g}"),
            points: res
                .rows
                .iter()
                .filter(|r| r.gain == g)
                .map(|r| (r.kappa, r.value))
                .collect(),
        })
        .collect()
}

fn emit_panel(
    name: &str,
    title: &str,
    y_label: &str,
    res: &SweepResult,
    log_y: bool,
    extra_meta: &[(String, String)],
) -> Vec<OutputFile> {
    let mut res = res.clone();
    for kv in extra_meta {
        res.meta.push(kv.clone());
    }
    let svg = line_plot(
        title,
        "kappa_I [nm^-1]",
        y_label,
        &per_gain_series(&res),
        true,
        log_y,
    );
    vec![
        OutputFile {
            name: format!("{name}.csv"),
            contents: emit_csv(&res),
        },
        OutputFile {
            name: format!("{name}.svg"),
            contents: svg,
        },
    ]
}

pub fn reproduce(which: &str, base: &SweepConfig, meta: &[(String, String)]) -> anyhow::Result<Vec<OutputFile>> {
    let sweep = |model, access, quantity| -> anyhow::Result<SweepResult> {
        Ok(run_sweep(&panel_sweep(base, model, access, quantity))?)
    };
    let qfi = Quantity::Qfi;

    let files = match which {
        "fig2a" => emit_panel(
            "fig2a",
            "Full-access QFI, SU(1,1)/IC",
            "H_kappa [nm^2]",
            &sweep(Model::Su11, Access::AllModes, qfi)?,
            true,
            meta,
        ),
        "fig2b" => emit_panel(
            "fig2b",
            "Full-access QFI, DL",
            "H_kappa [nm^2]",
            &sweep(Model::Dl, Access::AllModes, qfi)?,
            true,
            meta,
        ),
        "fig2c" => {
            let a = sweep(Model::Dl, Access::AllModes, qfi)?;
            let b = sweep(Model::Su11, Access::AllModes, qfi)?;
            emit_panel(
                "fig2c",
                "log10(H_DL / H_SU11), full access",
                "log10 ratio",
                &log_ratio(&a, &b, "dl_over_su11_full")?,
                false,
                meta,
            )
        }
        "fig2d" => emit_panel(
            "fig2d",
            "Two-mode IC QFI (idler traced out)",
            "H_kappa [nm^2]",
            &sweep(Model::Ic, Access::IcTwoMode, qfi)?,
            true,
            meta,
        ),
        "fig2e" => {
            let a = sweep(Model::Ic, Access::IcTwoMode, qfi)?;
            let b = sweep(Model::Su11, Access::SingleMode, qfi)?;
            emit_panel(
                "fig2e",
                "log10(H_IC,TM / H_SU11,SM)",
                "log10 ratio",
                &log_ratio(&a, &b, "ic_two_mode_over_su11_single")?,
                false,
                meta,
            )
        }
        "fig2f" => {
            let a = sweep(Model::Ic, Access::IcTwoMode, qfi)?;
            let b = sweep(Model::Dl, Access::SingleMode, qfi)?;
            emit_panel(
                "fig2f",
                "log10(H_IC,TM / H_DL,SM)",
                "log10 ratio",
                &log_ratio(&a, &b, "ic_two_mode_over_dl_single")?,
                false,
                meta,
            )
        }
        "fig2g" => emit_panel(
            "fig2g",
            "Single-mode QFI, SU(1,1)",
            "H_kappa [nm^2]",
            &sweep(Model::Su11, Access::SingleMode, qfi)?,
            true,
            meta,
        ),
        "fig2h" => emit_panel(
            "fig2h",
            "Single-mode QFI, DL",
            "H_kappa [nm^2]",
            &sweep(Model::Dl, Access::SingleMode, qfi)?,
            true,
            meta,
        ),
        "fig2i" => emit_panel(
            "fig2i",
            "Single-mode QFI, IC",
            "H_kappa [nm^2]",
            &sweep(Model::Ic, Access::SingleMode, qfi)?,
            true,
            meta,
        ),
        "fig2j" => {
            let a = sweep(Model::Dl, Access::SingleMode, qfi)?;
            let b = sweep(Model::Su11, Access::SingleMode, qfi)?;
            emit_panel(
                "fig2j",
                "log10(H_DL,SM / H_SU11,SM)",
                "log10 ratio",
                &log_ratio(&a, &b, "dl_single_over_su11_single")?,
                false,
                meta,
            )
        }
        "fig2k" => {
            let a = sweep(Model::Ic, Access::SingleMode, qfi)?;
            let b = sweep(Model::Su11, Access::SingleMode, qfi)?;
            emit_panel(
                "fig2k",
                "log10(H_IC,SM / H_SU11,SM)",
                "log10 ratio",
                &log_ratio(&a, &b, "ic_single_over_su11_single")?,
                false,
                meta,
            )
        }
        "fig2l" => {
            let a = sweep(Model::Ic, Access::SingleMode, qfi)?;
            let b = sweep(Model::Dl, Access::SingleMode, qfi)?;
            emit_panel(
                "fig2l",
                "log10(H_IC,SM / H_DL,SM)",
                "log10 ratio",
                &log_ratio(&a, &b, "ic_single_over_dl_single")?,
                false,
                meta,
            )
        }
        "fig3" => fig3(base, meta)?,
        "fig4" => fig4(base, meta)?,
        other => bail!("unknown figure {other:?} (expected fig2a..fig2l, fig3, or fig4)"),
    };
    Ok(files)
}

/// Inverse ratio (N_S - N_I)/H for the DL model in both parametrizations,
/// with the alpha = 1.1 approximate form as an overlay series.
fn fig3(base: &SweepConfig, meta: &[(String, String)]) -> anyhow::Result<Vec<OutputFile>> {
    let length = base.length;
    let kappas = base.grid.points();
    let mut files = Vec::new();

    for (panel, estimand) in [("fig3_kappa", Estimand::KappaI), ("fig3_eta", Estimand::EtaI)] {
        let mut rows = Vec::new();
        let mut fit_rows = Vec::new();
        for &n_peak in &base.gains {
            let gain = GainSpec::new(n_peak)?;
            for &kappa in &kappas {
                let eta = (-kappa * length).exp();
                let m = dl_point_moments(&gain, kappa, length)?;
                let h_kappa = dl_numeric_qfi_kappa(&gain, kappa, length)?;
                let h = match estimand {
                    Estimand::KappaI => h_kappa,
                    Estimand::EtaI => h_kappa / (length * length * eta * eta),
                };
                rows.push(SweepRow {
                    kappa,
                    eta,
                    gain: n_peak,
                    value: (m.n_s - m.n_i) / h,
                    flag: RowFlag::Ok,
                });
            }
        }
        for &kappa in &kappas {
            let eta = (-kappa * length).exp();
            let fit = match estimand {
                Estimand::KappaI => ALPHA_FIT * kappa * kappa,
                Estimand::EtaI => ALPHA_FIT * kappa * kappa * length * length * eta * eta,
            };
            fit_rows.push(SweepRow {
                kappa,
                eta,
                gain: 0.0,
                value: fit,
                flag: RowFlag::Ok,
            });
        }

        let mut base_meta = vec![
            ("quantity".into(), "inverse_ratio".into()),
            ("estimand".into(), estimand.as_str().into()),
        ];
        base_meta.extend_from_slice(meta);
        let res = SweepResult {
            meta: base_meta.clone(),
            rows,
        };
        let mut fit_meta = base_meta;
        fit_meta.push(("fit_alpha".into(), format!("{ALPHA_FIT}")));
        let fit = SweepResult {
            meta: fit_meta,
            rows: fit_rows,
        };

        let mut series = per_gain_series(&res);
        series.push(Series {
            label: format!("Fit alpha = {ALPHA_FIT}"),
            points: fit.rows.iter().map(|r| (r.kappa, r.value)).collect(),
        });
        files.push(OutputFile {
            name: format!("{panel}.csv"),
            contents: emit_csv(&res),
        });
        files.push(OutputFile {
            name: format!("{panel}_fit.csv"),
            contents: emit_csv(&fit),
        });
        files.push(OutputFile {
            name: format!("{panel}.svg"),
            contents: line_plot(
                &format!("(N_S - N_I) / H, estimand {}", estimand.as_str()),
                "kappa_I [nm^-1]",
                "inverse ratio",
                &series,
                true,
                true,
            ),
        });
    }
    Ok(files)
}

/// Inverse intensity-difference error for SU(1,1) and DL, plus their ratio.
fn fig4(base: &SweepConfig, meta: &[(String, String)]) -> anyhow::Result<Vec<OutputFile>> {
    let su11 = run_sweep(&panel_sweep(
        base,
        Model::Su11,
        Access::AllModes,
        Quantity::InverseDiffError,
    ))?;
    let dl = run_sweep(&panel_sweep(
        base,
        Model::Dl,
        Access::AllModes,
        Quantity::InverseDiffError,
    ))?;
    let mut files = emit_panel(
        "fig4a",
        "Inverse intensity-difference error, SU(1,1)",
        "1/Delta^2 kappa [nm^2]",
        &su11,
        true,
        meta,
    );
    files.extend(emit_panel(
        "fig4b",
        "Inverse intensity-difference error, DL",
        "1/Delta^2 kappa [nm^2]",
        &dl,
        true,
        meta,
    ));
    files.extend(emit_panel(
        "fig4c",
        "log10 ratio SU(1,1) / DL",
        "log10 ratio",
        &log_ratio(&su11, &dl, "su11_over_dl_inverse_error")?,
        false,
        meta,
    ));
    Ok(files)
}
