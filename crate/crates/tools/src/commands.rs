//! Single-stage commands that read and write artifacts in the output
//! directory, so a pipeline can be run one step at a time.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rom_core::ecsw::EcswModel;
use rom_core::fe::StructuralModel;
use rom_core::reduced::{transform_tensors, BasisTag, TensorSet};
use rom_core::rom::{newmark_observe, RomModel, State};

use crate::config::PipelineConfig;
use crate::error::{StageExt, ToolError, ToolResult};
use crate::formats::{self, load, save};
use crate::pipeline::{self, Artifacts, Mode};

const SNAPSHOTS: &str = "snapshots";

fn finish<T>(out: &Artifacts, result: ToolResult<T>) -> ToolResult<T> {
    out.write_manifest(result.as_ref().err())?;
    result
}

pub fn build_basis(cfg: &PipelineConfig) -> ToolResult<usize> {
    let mut out = Artifacts::extend(&cfg.output.directory);
    let result = (|| {
        let s = pipeline::setup(cfg)?;
        let b = pipeline::build_basis(cfg, &s)?;
        pipeline::write_basis(&mut out, &s, &b)?;
        Ok(b.basis.size())
    })();
    finish(&out, result)
}

/// Solves the reduced mesh. With `reuse`, training uses the stored snapshot
/// archive if its sample counts and seed match the configuration.
pub fn train_ecsw(cfg: &PipelineConfig, reuse: bool) -> ToolResult<EcswModel> {
    let dir = &cfg.output.directory;
    let mut out = Artifacts::extend(dir);
    let result = (|| {
        let s = pipeline::setup(cfg)?;
        let b = pipeline::read_basis(dir)?;
        let archive = dir.join(SNAPSHOTS);
        let t = &cfg.training;
        let stored = if !reuse || !archive.join("manifest.txt").is_file() {
            None
        } else {
            Some(formats::read_snapshots(&archive)?).filter(|sets| {
                sets.seed == t.seed
                    && sets.n_train == t.n_train
                    && sets.n_validate == t.n_validate
                    && sets.displacements.iter().all(|q| q.len() == s.model.n_dofs())
            })
        };
        let train = match stored {
            Some(sets) => {
                log::info!("reusing snapshots in {}", archive.display());
                pipeline::training_from_sets(&s, &b, sets)?
            }
            None => {
                let train = pipeline::training(cfg, &s, &b)?;
                formats::write_snapshots(&archive, &train.sets)?;
                train
            }
        };
        out.note("snapshots/");
        let (ecsw, _) = pipeline::reduced_mesh(&train, t.tau)?;
        let n_el = s.model.n_elements();
        out.save("ecsw.txt", |w| formats::write_ecsw(w, &ecsw, n_el))?;
        Ok(ecsw)
    })();
    finish(&out, result)
}

pub fn identify(cfg: &PipelineConfig, mode: Mode) -> ToolResult<pipeline::IdentifyStage> {
    let dir = &cfg.output.directory;
    let mut out = Artifacts::extend(dir);
    let result = (|| {
        let s = pipeline::setup(cfg)?;
        let b = pipeline::read_basis(dir)?;
        let ecsw = match mode {
            Mode::EedEcsw => {
                let (e, total) = load(&dir.join("ecsw.txt"), formats::read_ecsw)?;
                if total != s.model.n_elements() {
                    return Err(ToolError::Config(format!(
                        "ecsw.txt was trained on {total} elements, mesh has {}",
                        s.model.n_elements()
                    )));
                }
                Some(e)
            }
            _ => None,
        };
        let id = pipeline::identify(cfg, &s, &b, mode, ecsw.as_ref())?;
        out.save("tensors_v.txt", |w| formats::write_tensors(w, &id.tensors))?;
        let tw = transform_tensors(&id.tensors, &b.basis.u, BasisTag::W).stage("transformation")?;
        out.save("tensors_w.txt", |w| formats::write_tensors(w, &tw))?;
        out.save("identify.txt", |w| {
            writeln!(w, "mode = {mode}")?;
            writeln!(w, "basis_size = {}", id.tensors.size())?;
            writeln!(w, "tangent_queries = {}", id.stats.tangent_queries)?;
            writeln!(w, "element_evaluations = {}", id.element_evaluations)?;
            if let Some(e) = &ecsw {
                writeln!(w, "element_ratio = {}/{}", e.len(), s.model.n_elements())?;
            }
            writeln!(w, "time_fe_queries = {:.6}", id.stats.query_time.as_secs_f64())?;
            writeln!(w, "time_reading = {:.6}", id.stats.projection_time.as_secs_f64())?;
            writeln!(w, "time_total = {:.6}", id.time.as_secs_f64())?;
            Ok(())
        })?;
        Ok(id)
    })();
    finish(&out, result)
}

fn read_tensors(dir: &Path) -> ToolResult<TensorSet> {
    load(&dir.join("tensors_w.txt"), formats::read_tensors)
}

/// Rows of `(time, values)` from a trajectory CSV.
fn read_series(path: &Path) -> ToolResult<(Vec<String>, Vec<Vec<f64>>)> {
    let (headers, cols) = load(path, |r| formats::read_csv(r))?;
    if headers.first().map(String::as_str) != Some("time") {
        return Err(ToolError::format(1, "first column must be time").at(path));
    }
    Ok((headers[1..].to_vec(), cols[1..].to_vec()))
}

/// Options of [`integrate`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrateOptions {
    /// Continue from `checkpoint.txt` under the stored `load.csv`.
    pub resume: bool,
    /// Write a checkpoint every this many steps (0: only at the end).
    pub checkpoint_every: usize,
    /// Stop after this many steps.
    pub max_steps: Option<usize>,
    /// Also integrate the full model (fresh runs only).
    pub hfm: bool,
}

/// Integrates the W-basis ROM; returns the last step reached.
pub fn integrate(cfg: &PipelineConfig, opts: IntegrateOptions) -> ToolResult<usize> {
    let IntegrateOptions {
        resume,
        checkpoint_every: every,
        max_steps,
        hfm,
    } = opts;
    if resume && hfm {
        return Err(ToolError::Config("the full-model reference cannot be resumed".into()));
    }
    let dir = &cfg.output.directory;
    let mut out = Artifacts::extend(dir);
    let result = (|| {
        let s = pipeline::setup(cfg)?;
        let b = pipeline::read_basis(dir)?;
        let tensors = read_tensors(dir)?;
        if tensors.basis != BasisTag::W || tensors.size() != b.basis.size() {
            return Err(ToolError::Config(
                "tensors_w.txt does not match the stored basis".into(),
            ));
        }
        let rayleigh = pipeline::rayleigh(cfg, &b)?;
        let rom = RomModel::build(b.basis.w.clone(), &s.mass, tensors, &s.load, rayleigh).stage("integration")?;
        let monitors = s.monitors(cfg)?;
        let names: Vec<String> = monitors.iter().map(|(n, _)| n.clone()).collect();
        let rows: Vec<DVector<f64>> = monitors.iter().map(|(_, d)| rom.basis.row(*d).transpose()).collect();

        let (amplitude, initial, mut history) = if resume {
            let (_, cols) = load(&dir.join("load.csv"), |r| formats::read_csv(r))?;
            let amplitude = cols
                .get(1)
                .cloned()
                .ok_or_else(|| ToolError::Config("load.csv has no pressure column".into()))?;
            let state = load(&dir.join("checkpoint.txt"), formats::read_checkpoint)?;
            if state.displacement.len() != rom.tensors.size() || state.step >= amplitude.len() {
                return Err(ToolError::Config("checkpoint does not match the model or load".into()));
            }
            let (stored, mut series) = read_series(&dir.join("trajectory.csv"))?;
            if stored != names || series.iter().any(|c| c.len() <= state.step) {
                return Err(ToolError::Config("trajectory.csv does not match the checkpoint".into()));
            }
            for c in &mut series {
                c.truncate(state.step + 1);
            }
            (amplitude, state, series)
        } else {
            let amplitude = gen_load(cfg, &mut out)?;
            let state = State::at_rest(rom.tensors.size());
            let first = rows.iter().map(|r| vec![r.dot(&state.displacement)]).collect();
            (amplitude, state, first)
        };

        let checkpoint = dir.join("checkpoint.txt");
        let mut io_error = None;
        let end = max_steps.map_or(amplitude.len(), |n| amplitude.len().min(initial.step + n + 1));
        let (last, _) = newmark_observe(&rom, &amplitude[..end], cfg.load.dt, &cfg.newmark(), initial, |st| {
            for (c, r) in history.iter_mut().zip(&rows) {
                c.push(r.dot(&st.displacement));
            }
            if every > 0 && st.step % every == 0 && io_error.is_none() {
                io_error = save(&checkpoint, |w| formats::write_checkpoint(w, st)).err();
            }
        })
        .stage("integration")?;
        if let Some(e) = io_error {
            return Err(e);
        }
        out.save("checkpoint.txt", |w| formats::write_checkpoint(w, &last))?;
        pipeline::write_series(&mut out, "trajectory.csv", cfg.load.dt, &names, &history)?;

        if hfm {
            let reference = pipeline::integrate_hfm(cfg, &s, rayleigh, &amplitude, &monitors)?;
            pipeline::write_series(&mut out, "hfm_trajectory.csv", cfg.load.dt, &names, &reference.series)?;
        }
        Ok(last.step)
    })();
    finish(&out, result)
}

fn gen_load(cfg: &PipelineConfig, out: &mut Artifacts) -> ToolResult<Vec<f64>> {
    let amplitude = rom_core::signal::gen_pressure(&cfg.load_spec()).stage("load")?;
    pipeline::write_load(out, cfg.load.dt, &amplitude)?;
    Ok(amplitude)
}

/// Spectral summary written by [`psd`].
#[derive(Debug, Clone, PartialEq)]
pub struct PsdSummary {
    pub names: Vec<String>,
    pub resolution: f64,
    pub peaks: Vec<Option<f64>>,
    pub reference_peaks: Option<Vec<Option<f64>>>,
    pub deviation_db: Option<Vec<f64>>,
}

/// PSDs of `trajectory.csv`, and of `hfm_trajectory.csv` when present, with
/// band-limited deviations and peak frequencies in `psd_comparison.txt`.
pub fn psd(cfg: &PipelineConfig) -> ToolResult<PsdSummary> {
    let dir = &cfg.output.directory;
    let mut out = Artifacts::extend(dir);
    let result = (|| {
        let band = (0.0, cfg.load.cutoff_hz);
        let (names, series) = read_series(&dir.join("trajectory.csv"))?;
        let p = pipeline::psds(cfg, &series)?;
        pipeline::write_psds(&mut out, "psd.csv", &names, &p)?;
        let mut summary = PsdSummary {
            resolution: p.first().map_or(0.0, |x| x.resolution()),
            peaks: p.iter().map(|x| pipeline::peak_frequency(x, band)).collect(),
            names,
            reference_peaks: None,
            deviation_db: None,
        };
        let hfm = dir.join("hfm_trajectory.csv");
        if hfm.is_file() {
            let (ref_names, ref_series) = read_series(&hfm)?;
            if ref_names != summary.names {
                return Err(ToolError::Config("hfm_trajectory.csv monitors differ".into()));
            }
            let pr = pipeline::psds(cfg, &ref_series)?;
            pipeline::write_psds(&mut out, "hfm_psd.csv", &ref_names, &pr)?;
            summary.reference_peaks = Some(pr.iter().map(|x| pipeline::peak_frequency(x, band)).collect());
            summary.deviation_db = Some(pipeline::compare_psd(&p, &pr, band)?);
        }
        out.save("psd_comparison.txt", |w| write_summary(w, &summary))?;
        Ok(summary)
    })();
    finish(&out, result)
}

pub fn write_summary<W: Write>(mut w: W, s: &PsdSummary) -> ToolResult<()> {
    let f = |x: &Option<f64>| x.map_or("none".to_string(), |v| format!("{v}"));
    writeln!(w, "resolution_hz = {}", s.resolution)?;
    for (k, name) in s.names.iter().enumerate() {
        writeln!(w, "{name}.peak_hz = {}", f(&s.peaks[k]))?;
        if let Some(r) = &s.reference_peaks {
            writeln!(w, "{name}.reference_peak_hz = {}", f(&r[k]))?;
        }
        if let Some(d) = &s.deviation_db {
            writeln!(w, "{name}.mean_deviation_db = {}", d[k])?;
        }
    }
    Ok(())
}

pub fn sweep(cfg: &PipelineConfig, taus: &[f64], csv: &Path) -> ToolResult<Vec<pipeline::SweepRow>> {
    let rows = pipeline::tolerance_sweep(cfg, taus)?;
    save(csv, |w| pipeline::write_sweep(w, &rows))?;
    Ok(rows)
}
