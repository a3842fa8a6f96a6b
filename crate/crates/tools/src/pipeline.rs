//! End-to-end pipeline: basis, reduced mesh, tensor identification,
//! transformation, time integration and spectra, with phase timings.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rom_core::ecsw::{assemble_g_b, snnls, validate, EcswModel};
use rom_core::fe::{extract_full_tensors, Dof, FeModel, StructuralModel};
use rom_core::identify::{identify_tensors, plan_displacements, EcswTangent, ExactTangent, IdentificationStats};
use rom_core::linalg::SparseMatrix;
use rom_core::manifold::{alpha_ball_samples, build_training_sets, Split, SqmSampler, TrainingSets};
use rom_core::modal::{
    default_smd_step, rayleigh_fit, select_by_smpf, solve_vibration_modes, static_mpf, BasisLabel, ModalDerivatives,
    ModeSet, ReductionBasis, SmdSelection, SmdSolver,
};
use rom_core::reduced::{direct_projection, transform_tensors, BasisTag, TensorSet};
use rom_core::rom::{newmark_observe, FullOrderSystem, RomModel, State};
use rom_core::signal::{gen_pressure, welch_psd, Psd};

use crate::config::PipelineConfig;
use crate::error::{StageExt, ToolError, ToolResult};
use crate::formats::{self, load, save};
use crate::mesh::{read_mesh, Mesh};
use crate::mtx;

/// How the nonlinear reduced tensors are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Enforced displacements with full-mesh tangents.
    Eed,
    /// Enforced displacements with reduced-mesh tangents.
    EedEcsw,
    /// Projection of the full-model tensors.
    Direct,
    /// Linear stiffness only.
    Linear,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Eed => "eed",
            Mode::EedEcsw => "eed-ecsw",
            Mode::Direct => "direct",
            Mode::Linear => "linear",
        })
    }
}

impl FromStr for Mode {
    type Err = ToolError;

    fn from_str(s: &str) -> ToolResult<Self> {
        match s {
            "eed" => Ok(Mode::Eed),
            "eed-ecsw" => Ok(Mode::EedEcsw),
            "direct" => Ok(Mode::Direct),
            "linear" => Ok(Mode::Linear),
            other => Err(ToolError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Model, operators and load shape shared by every stage.
#[derive(Debug, Clone)]
pub struct Setup {
    pub mesh: Mesh,
    pub model: FeModel,
    pub k1: SparseMatrix,
    pub mass: SparseMatrix,
    /// Nodal load of a unit uniform pressure over the section width.
    pub load: DVector<f64>,
    pub translational: Vec<bool>,
    pub thickness: f64,
}

pub fn setup(cfg: &PipelineConfig) -> ToolResult<Setup> {
    cfg.validate()?;
    let mesh = load(&cfg.model.mesh, read_mesh)?;
    let material = cfg.material()?;
    let model = mesh.to_model(material)?;
    Ok(Setup {
        k1: model.linear_stiffness(),
        mass: model.assemble_mass(),
        load: model.unit_transverse_load() * cfg.model.width,
        translational: model.translational_dofs(),
        thickness: material.thickness_equivalent(),
        mesh,
        model,
    })
}

impl Setup {
    /// `(name, free dof)` of the monitored transverse displacements.
    pub fn monitors(&self, cfg: &PipelineConfig) -> ToolResult<Vec<(String, usize)>> {
        let nodes = if cfg.integration.monitor_nodes.is_empty() {
            vec![self.mesh.mid_node()]
        } else {
            cfg.integration.monitor_nodes.clone()
        };
        nodes
            .into_iter()
            .map(|n| {
                self.model
                    .free_dof(n, Dof::Transverse)
                    .map(|d| (format!("node{n}_w"), d))
                    .ok_or_else(|| ToolError::Config(format!("monitor node {n} is missing or clamped")))
            })
            .collect()
    }
}

/// Modes, selection metrics, derivatives and the reduction basis.
#[derive(Debug, Clone)]
pub struct BasisStage {
    pub modes: ModeSet,
    pub smpf: DVector<f64>,
    /// Indices into `modes` of the vibration modes in the basis.
    pub selected: Vec<usize>,
    /// Derivatives of all selected-mode pairs, indexed within `selected`.
    pub smds: ModalDerivatives,
    pub basis: ReductionBasis,
}

impl BasisStage {
    pub fn selected_modes(&self) -> DMatrix<f64> {
        DMatrix::from_columns(
            &self
                .selected
                .iter()
                .map(|&i| self.modes.shapes.column(i))
                .collect::<Vec<_>>(),
        )
    }

    pub fn selected_frequencies(&self) -> Vec<f64> {
        self.selected.iter().map(|&i| self.modes.frequencies[i]).collect()
    }
}

pub fn build_basis(cfg: &PipelineConfig, s: &Setup) -> ToolResult<BasisStage> {
    let b = &cfg.basis;
    if b.modes > s.model.n_dofs() {
        return Err(ToolError::Config(format!(
            "basis.modes exceeds the {} free dofs",
            s.model.n_dofs()
        )));
    }
    let modes = solve_vibration_modes(&s.k1, &s.mass, b.modes).stage("modes")?;
    let smpf = static_mpf(&modes, &s.k1, &s.load).stage("modes")?;
    let selected = match &b.vms {
        Some(v) => v.clone(),
        None => select_by_smpf(&smpf, b.smpf_top_k),
    };
    let vms = modes.select(&selected).stage("modes")?;
    let steps: Vec<f64> = (0..vms.len())
        .map(|i| default_smd_step(&vms.shape(i), &s.translational, s.thickness, b.smd_step_fraction))
        .collect();
    let smds = SmdSolver::new(&s.model)
        .and_then(|solver| solver.compute_all(&vms.shapes, &steps))
        .stage("derivatives")?;
    let selection = b.smd_top_k.map_or(SmdSelection::All, SmdSelection::TopK);
    let basis =
        ReductionBasis::build(&modes, &selected, &smds, &smpf, selection, &s.mass, &s.translational).stage("basis")?;
    if basis.w.ncols() < basis.v.ncols() {
        log::warn!(
            "{} basis vectors dropped as linearly dependent",
            basis.v.ncols() - basis.w.ncols()
        );
    }
    // transformed cubic coefficients carry up to four factors of U
    let sv = basis.u.singular_values();
    let cond = sv.max() / sv.min();
    if cond > 1e4 {
        log::warn!("transformation matrix condition number {cond:.2e}; W-basis coefficients amplify V-basis noise");
    }
    Ok(BasisStage {
        modes,
        smpf,
        selected,
        smds,
        basis,
    })
}

/// Records the files a run writes, for the manifest.
#[derive(Debug, Default)]
pub struct Artifacts {
    dir: PathBuf,
    /// Complete artifacts of earlier stages.
    previous: Vec<String>,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            previous: Vec::new(),
            written: Vec::new(),
        }
    }

    /// Like [`Artifacts::new`], keeping the `ok` entries of an existing
    /// manifest so stage-by-stage runs accumulate one listing.
    pub fn extend(dir: &Path) -> Self {
        let previous = std::fs::read_to_string(dir.join("manifest.txt"))
            .map(|text| {
                text.lines()
                    .filter_map(|l| l.strip_prefix("ok "))
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();
        Self {
            previous,
            ..Self::new(dir)
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn save(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> ToolResult<()>,
    ) -> ToolResult<()> {
        save(&self.dir.join(name), f)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn note(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    /// `manifest.txt`: status, failing stage if any, and every artifact.
    pub fn write_manifest(&self, failure: Option<&ToolError>) -> ToolResult<()> {
        save(&self.dir.join("manifest.txt"), |w| {
            match failure {
                None => writeln!(w, "status complete")?,
                Some(e) => {
                    writeln!(w, "status failed")?;
                    writeln!(w, "error {}", e.to_string().replace('\n', " "))?;
                }
            }
            let tag = if failure.is_some() { "partial" } else { "ok" };
            for name in self.previous.iter().filter(|p| !self.written.contains(p)) {
                writeln!(w, "ok {name}")?;
            }
            for name in &self.written {
                writeln!(w, "{tag} {name}")?;
            }
            Ok(())
        })
    }
}

pub fn write_basis(out: &mut Artifacts, s: &Setup, b: &BasisStage) -> ToolResult<()> {
    out.save("k1.mtx", |w| mtx::write_sparse(w, &s.k1))?;
    out.save("mass.mtx", |w| mtx::write_sparse(w, &s.mass))?;
    out.save("load.txt", |w| formats::write_vector(w, &s.load))?;
    out.save("modes.mtx", |w| mtx::write_dense(w, &b.modes.shapes))?;
    out.save("frequencies.txt", |w| formats::write_vector(w, &b.modes.frequencies))?;
    out.save("smpf.txt", |w| formats::write_vector(w, &b.smpf))?;
    let smd_cols = DMatrix::from_columns(b.smds.vectors());
    out.save("smds.mtx", |w| mtx::write_dense(w, &smd_cols))?;
    out.save("basis_v.mtx", |w| mtx::write_dense(w, &b.basis.v))?;
    out.save("basis_w.mtx", |w| mtx::write_dense(w, &b.basis.w))?;
    out.save("basis_u.mtx", |w| mtx::write_dense(w, &b.basis.u))?;
    out.save("basis_labels.txt", |w| formats::write_labels(w, &b.basis.labels))?;
    out.save("selected.txt", |w| {
        for i in &b.selected {
            writeln!(w, "{i}")?;
        }
        Ok(())
    })
}

/// Reads what [`write_basis`] wrote.
pub fn read_basis(dir: &Path) -> ToolResult<BasisStage> {
    let dense = |name: &str| load(&dir.join(name), mtx::read_dense);
    let shapes = dense("modes.mtx")?;
    let frequencies = load(&dir.join("frequencies.txt"), formats::read_vector)?;
    let smpf = load(&dir.join("smpf.txt"), formats::read_vector)?;
    let selected: Vec<usize> = load(&dir.join("selected.txt"), formats::read_vector)?
        .iter()
        .map(|&x| x as usize)
        .collect();
    let smd_cols = dense("smds.mtx")?;
    let smds = ModalDerivatives::from_vectors(selected.len(), smd_cols.column_iter().map(|c| c.into_owned()).collect())
        .stage("basis")?;
    let basis = ReductionBasis {
        v: dense("basis_v.mtx")?,
        w: dense("basis_w.mtx")?,
        u: dense("basis_u.mtx")?,
        labels: load(&dir.join("basis_labels.txt"), formats::read_labels)?,
    };
    if frequencies.len() != shapes.ncols() || basis.labels.len() != basis.v.ncols() {
        return Err(ToolError::format(0, "basis files are inconsistent").at(dir));
    }
    Ok(BasisStage {
        modes: ModeSet { shapes, frequencies },
        smpf,
        selected,
        smds,
        basis,
    })
}

/// Training data for the reduced-mesh solve.
#[derive(Debug, Clone)]
pub struct TrainingStage {
    pub sets: TrainingSets,
    pub g: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g_validate: DMatrix<f64>,
    pub b_validate: DVector<f64>,
    pub time: Duration,
}

pub fn alpha(cfg: &PipelineConfig, s: &Setup) -> f64 {
    cfg.training.alpha_factor * s.thickness
}

pub fn training(cfg: &PipelineConfig, s: &Setup, b: &BasisStage) -> ToolResult<TrainingStage> {
    let t0 = Instant::now();
    let t = &cfg.training;
    let sampler =
        SqmSampler::new(b.selected_modes(), b.smds.clone(), &s.translational, alpha(cfg, s)).stage("training")?;
    let sets = build_training_sets(&s.model, &sampler, t.n_train, t.n_validate, t.seed).stage("training")?;
    let mut stage = training_from_sets(s, b, sets)?;
    stage.time = t0.elapsed();
    Ok(stage)
}

/// Assembles the training system from existing snapshots.
pub fn training_from_sets(s: &Setup, b: &BasisStage, sets: TrainingSets) -> ToolResult<TrainingStage> {
    let t0 = Instant::now();
    let (g, rhs) = assemble_g_b(&s.model, &b.basis.v, &sets, Split::Train).stage("training")?;
    let (g_validate, b_validate) = assemble_g_b(&s.model, &b.basis.v, &sets, Split::Validate).stage("training")?;
    Ok(TrainingStage {
        sets,
        g,
        b: rhs,
        g_validate,
        b_validate,
        time: t0.elapsed(),
    })
}

pub fn reduced_mesh(t: &TrainingStage, tau: f64) -> ToolResult<(EcswModel, Duration)> {
    let t0 = Instant::now();
    let mut ecsw = snnls(&t.g, &t.b, tau).stage("reduced mesh")?;
    if t.g_validate.nrows() > 0 {
        validate(&mut ecsw, &t.g_validate, &t.b_validate).stage("reduced mesh")?;
    }
    Ok((ecsw, t0.elapsed()))
}

/// Outcome of one identification run.
#[derive(Debug, Clone)]
pub struct IdentifyStage {
    pub tensors: TensorSet,
    pub stats: IdentificationStats,
    pub element_evaluations: usize,
    pub time: Duration,
}

pub fn identify(
    cfg: &PipelineConfig,
    s: &Setup,
    b: &BasisStage,
    mode: Mode,
    ecsw: Option<&EcswModel>,
) -> ToolResult<IdentifyStage> {
    let t0 = Instant::now();
    let v = &b.basis.v;
    let k1r = s.k1.project(v);
    let plan = || plan_displacements(v, &s.translational, cfg.alpha_id_factor() * s.thickness).stage("identification");
    let (tensors, stats, element_evaluations) = match mode {
        Mode::Eed => {
            s.model.reset_stats();
            let mut provider = ExactTangent::new(&s.model, v, k1r.clone());
            let (t, st) = identify_tensors(&k1r, &plan()?, &mut provider).stage("identification")?;
            (t, st, s.model.stats().element_evaluations)
        }
        Mode::EedEcsw => {
            let ecsw = ecsw.ok_or_else(|| ToolError::Config("eed-ecsw needs a reduced mesh".into()))?;
            let mut provider = EcswTangent::new(&s.model, ecsw, v).stage("identification")?;
            let (t, st) = identify_tensors(&k1r, &plan()?, &mut provider).stage("identification")?;
            (t, st, provider.restricted().stats().element_evaluations)
        }
        Mode::Direct => {
            let t1 = Instant::now();
            let full = extract_full_tensors(&s.model).stage("identification")?;
            let t = direct_projection(&full, v).stage("identification")?;
            let st = IdentificationStats {
                solve_time: t1.elapsed(),
                ..Default::default()
            };
            (t, st, 0)
        }
        Mode::Linear => (
            TensorSet::new(k1r, BasisTag::V).stage("identification")?,
            IdentificationStats::default(),
            0,
        ),
    };
    Ok(IdentifyStage {
        tensors,
        stats,
        element_evaluations,
        time: t0.elapsed(),
    })
}

/// Relative RMS of `‖f_a(η) − f_b(η)‖` over `‖f_b(η)‖` for the samples.
pub fn force_error(approx: &TensorSet, exact: &TensorSet, samples: &[DVector<f64>]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for eta in samples {
        let fe = exact.force(eta);
        num += (approx.force(eta) - &fe).norm_squared();
        den += fe.norm_squared();
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Per-phase wall times, following the identification cost breakdown.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Phases {
    pub basis: Duration,
    pub reduced_mesh: Duration,
    pub fe_queries: Duration,
    pub reading: Duration,
    pub identification: Duration,
    pub transformation: Duration,
    /// Time integration, reference runs and spectra.
    pub integration: Duration,
    pub other: Duration,
}

impl Phases {
    pub fn total(&self) -> Duration {
        self.basis
            + self.reduced_mesh
            + self.fe_queries
            + self.reading
            + self.identification
            + self.transformation
            + self.integration
            + self.other
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub mode: Mode,
    pub basis_size: usize,
    pub n_elements: usize,
    pub reduced_elements: Option<usize>,
    pub tangent_queries: usize,
    pub element_evaluations: usize,
    pub ecsw_training_residual: Option<f64>,
    pub ecsw_validation_error: Option<f64>,
    /// Relative difference to the direct-projection tensors, per order.
    pub tensor_error: Option<[f64; 3]>,
    /// Full-mesh identification time over reduced mesh plus reduced-mesh
    /// identification time (eed-ecsw only).
    pub speedup: Option<f64>,
    /// Ratio of the FE-query phase times of the same two runs.
    pub fe_query_speedup: Option<f64>,
    /// Mean absolute PSD deviation (dB) from the full-model reference.
    pub psd_deviation_db: Option<Vec<f64>>,
    pub phases: Phases,
}

impl BenchmarkReport {
    /// `|Ẽ| / N_e` (1 without a reduced mesh).
    pub fn element_ratio(&self) -> f64 {
        self.reduced_elements.unwrap_or(self.n_elements) as f64 / self.n_elements as f64
    }

    /// Key-value text; timing keys start with `time_`.
    pub fn write<W: Write>(&self, mut w: W) -> ToolResult<()> {
        let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:e}"));
        writeln!(w, "mode = {}", self.mode)?;
        writeln!(w, "basis_size = {}", self.basis_size)?;
        writeln!(w, "n_elements = {}", self.n_elements)?;
        writeln!(
            w,
            "reduced_elements = {}",
            self.reduced_elements.map_or("none".into(), |n| n.to_string())
        )?;
        writeln!(
            w,
            "element_ratio = {}",
            match self.reduced_elements {
                Some(n) => format!("{n}/{}", self.n_elements),
                None => "none".into(),
            }
        )?;
        writeln!(w, "tangent_queries = {}", self.tangent_queries)?;
        writeln!(w, "element_evaluations = {}", self.element_evaluations)?;
        writeln!(w, "ecsw_training_residual = {}", opt(self.ecsw_training_residual))?;
        writeln!(w, "ecsw_validation_error = {}", opt(self.ecsw_validation_error))?;
        match self.tensor_error {
            Some([a, b, c]) => writeln!(w, "tensor_error = {a:e} {b:e} {c:e}")?,
            None => writeln!(w, "tensor_error = none")?,
        }
        writeln!(w, "speedup = {}", opt(self.speedup))?;
        writeln!(w, "fe_query_speedup = {}", opt(self.fe_query_speedup))?;
        match &self.psd_deviation_db {
            Some(d) => writeln!(
                w,
                "psd_deviation_db = {}",
                d.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
            )?,
            None => writeln!(w, "psd_deviation_db = none")?,
        }
        let p = &self.phases;
        for (k, d) in [
            ("basis", p.basis),
            ("reduced_mesh", p.reduced_mesh),
            ("fe_queries", p.fe_queries),
            ("reading", p.reading),
            ("identification", p.identification),
            ("transformation", p.transformation),
            ("integration", p.integration),
            ("other", p.other),
            ("total", p.total()),
        ] {
            writeln!(w, "time_{k} = {:.6}", d.as_secs_f64())?;
        }
        Ok(())
    }
}

/// Recorded transverse histories at the monitored dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub names: Vec<String>,
    pub series: Vec<Vec<f64>>,
    pub final_state: State,
}

/// Integrates `rom` under `amplitude`, recording `rows · x` for each monitor.
pub fn integrate_rom(
    cfg: &PipelineConfig,
    rom: &RomModel,
    amplitude: &[f64],
    monitors: &[(String, usize)],
    initial: State,
) -> ToolResult<Response> {
    let rows: Vec<DVector<f64>> = monitors.iter().map(|(_, d)| rom.basis.row(*d).transpose()).collect();
    let mut series = vec![Vec::with_capacity(amplitude.len()); monitors.len()];
    for (s, r) in series.iter_mut().zip(&rows) {
        s.push(r.dot(&initial.displacement));
    }
    let (final_state, _) = newmark_observe(rom, amplitude, cfg.load.dt, &cfg.newmark(), initial, |st| {
        for (s, r) in series.iter_mut().zip(&rows) {
            s.push(r.dot(&st.displacement));
        }
    })
    .stage("integration")?;
    Ok(Response {
        names: monitors.iter().map(|(n, _)| n.clone()).collect(),
        series,
        final_state,
    })
}

pub fn integrate_hfm(
    cfg: &PipelineConfig,
    s: &Setup,
    rayleigh: (f64, f64),
    amplitude: &[f64],
    monitors: &[(String, usize)],
) -> ToolResult<Response> {
    let hfm = FullOrderSystem::new(&s.model, s.load.clone(), rayleigh).stage("reference")?;
    let n = s.model.n_dofs();
    let mut series = vec![vec![0.0]; monitors.len()];
    let (final_state, _) = newmark_observe(&hfm, amplitude, cfg.load.dt, &cfg.newmark(), State::at_rest(n), |st| {
        for (s, (_, d)) in series.iter_mut().zip(monitors) {
            s.push(st.displacement[*d]);
        }
    })
    .stage("reference")?;
    Ok(Response {
        names: monitors.iter().map(|(n, _)| n.clone()).collect(),
        series,
        final_state,
    })
}

pub fn psds(cfg: &PipelineConfig, series: &[Vec<f64>]) -> ToolResult<Vec<Psd>> {
    series
        .iter()
        .map(|x| welch_psd(x, 1.0 / cfg.load.dt, cfg.psd.segment_len, cfg.psd.overlap).stage("psd"))
        .collect()
}

/// Mean `|10 log10(S / S_ref)|` over bins with `band.0 < f ≤ band.1`, per
/// series pair.
pub fn compare_psd(psd: &[Psd], reference: &[Psd], band: (f64, f64)) -> ToolResult<Vec<f64>> {
    if psd.len() != reference.len() {
        return Err(ToolError::Config("PSD sets differ in length".into()));
    }
    psd.iter()
        .zip(reference)
        .map(|(a, r)| {
            if a.frequencies != r.frequencies {
                return Err(ToolError::Config("PSDs have different frequency grids".into()));
            }
            let devs: Vec<f64> = a
                .frequencies
                .iter()
                .enumerate()
                .filter(|(_, f)| **f > band.0 && **f <= band.1)
                .map(|(k, _)| {
                    if a.values[k] == r.values[k] {
                        0.0
                    } else {
                        (10.0 * (a.values[k] / r.values[k]).log10()).abs()
                    }
                })
                .collect();
            if devs.is_empty() {
                return Err(ToolError::Config(format!("no PSD bins in band {band:?}")));
            }
            Ok(devs.iter().sum::<f64>() / devs.len() as f64)
        })
        .collect()
}

/// Frequency of the largest PSD value with `band.0 < f ≤ band.1`.
pub fn peak_frequency(psd: &Psd, band: (f64, f64)) -> Option<f64> {
    psd.frequencies
        .iter()
        .zip(&psd.values)
        .filter(|(f, _)| **f > band.0 && **f <= band.1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(f, _)| *f)
}

pub(crate) fn write_series(
    out: &mut Artifacts,
    name: &str,
    dt: f64,
    names: &[String],
    cols: &[Vec<f64>],
) -> ToolResult<()> {
    let t: Vec<f64> = (0..cols.first().map_or(0, Vec::len)).map(|k| k as f64 * dt).collect();
    let mut headers = vec!["time".to_string()];
    headers.extend(names.iter().cloned());
    let mut refs: Vec<&[f64]> = vec![&t];
    refs.extend(cols.iter().map(Vec::as_slice));
    out.save(name, |w| formats::write_csv(w, &headers, &refs))
}

pub(crate) fn write_psds(out: &mut Artifacts, name: &str, names: &[String], p: &[Psd]) -> ToolResult<()> {
    let Some(first) = p.first() else { return Ok(()) };
    let mut headers = vec!["frequency".to_string()];
    headers.extend(names.iter().cloned());
    let mut cols: Vec<&[f64]> = vec![&first.frequencies];
    cols.extend(p.iter().map(|x| x.values.as_slice()));
    out.save(name, |w| formats::write_csv(w, &headers, &cols))
}

/// Writes the pressure history to `load.csv`.
pub(crate) fn write_load(out: &mut Artifacts, dt: f64, amplitude: &[f64]) -> ToolResult<()> {
    let t: Vec<f64> = (0..amplitude.len()).map(|k| k as f64 * dt).collect();
    out.save("load.csv", |w| {
        formats::write_csv(w, &["time".into(), "pressure".into()], &[&t, amplitude])
    })
}

pub fn rayleigh(cfg: &PipelineConfig, b: &BasisStage) -> ToolResult<(f64, f64)> {
    if cfg.integration.damping_ratio == 0.0 {
        return Ok((0.0, 0.0));
    }
    rayleigh_fit(&b.selected_frequencies(), cfg.integration.damping_ratio).stage("damping")
}

/// Runs every stage for `mode`, writing artifacts and `report.txt`. A
/// manifest lists what was written, marked partial on failure.
pub fn run_pipeline(cfg: &PipelineConfig, mode: Mode) -> ToolResult<BenchmarkReport> {
    let mut out = Artifacts::new(&cfg.output.directory);
    let result = run_stages(cfg, mode, &mut out);
    out.write_manifest(result.as_ref().err())?;
    result
}

fn run_stages(cfg: &PipelineConfig, mode: Mode, out: &mut Artifacts) -> ToolResult<BenchmarkReport> {
    let start = Instant::now();
    let mut phases = Phases::default();
    let s = setup(cfg)?;

    let t0 = Instant::now();
    let b = build_basis(cfg, &s)?;
    phases.basis = t0.elapsed();
    write_basis(out, &s, &b)?;

    let mut ecsw = None;
    if mode == Mode::EedEcsw {
        let t = training(cfg, &s, &b)?;
        formats::write_snapshots(&out.dir().join("snapshots"), &t.sets)?;
        out.note("snapshots/");
        let (model, dt) = reduced_mesh(&t, cfg.training.tau)?;
        phases.reduced_mesh = t.time + dt;
        let n_el = s.model.n_elements();
        out.save("ecsw.txt", |w| formats::write_ecsw(w, &model, n_el))?;
        ecsw = Some(model);
    }

    let id = identify(cfg, &s, &b, mode, ecsw.as_ref())?;
    phases.fe_queries = id.stats.query_time;
    phases.reading = id.stats.projection_time;
    phases.identification = id.time.saturating_sub(id.stats.query_time + id.stats.projection_time);
    out.save("tensors_v.txt", |w| formats::write_tensors(w, &id.tensors))?;

    let t0 = Instant::now();
    let tensors_w = transform_tensors(&id.tensors, &b.basis.u, BasisTag::W).stage("transformation")?;
    phases.transformation = t0.elapsed();
    out.save("tensors_w.txt", |w| formats::write_tensors(w, &tensors_w))?;

    let (mut speedup, mut fe_query_speedup) = (None, None);
    if mode == Mode::EedEcsw {
        let baseline = identify(cfg, &s, &b, Mode::Eed, None)?;
        let t_id = phases.reduced_mesh + id.time;
        speedup = Some(baseline.time.as_secs_f64() / t_id.as_secs_f64());
        fe_query_speedup = Some(baseline.stats.query_time.as_secs_f64() / id.stats.query_time.as_secs_f64());
    }

    let tensor_error = if cfg.identify.compare_direct && mode != Mode::Direct {
        let full = extract_full_tensors(&s.model).stage("comparison")?;
        let direct = direct_projection(&full, &b.basis.v).stage("comparison")?;
        Some(id.tensors.relative_difference(&direct).stage("comparison")?)
    } else {
        None
    };

    let mut psd_deviation_db = None;
    if cfg.integration.enabled {
        let t0 = Instant::now();
        let rayleigh = rayleigh(cfg, &b)?;
        let amplitude = gen_pressure(&cfg.load_spec()).stage("load")?;
        write_load(out, cfg.load.dt, &amplitude)?;
        let rom =
            RomModel::build(b.basis.w.clone(), &s.mass, tensors_w.clone(), &s.load, rayleigh).stage("integration")?;
        let monitors = s.monitors(cfg)?;
        let resp = integrate_rom(cfg, &rom, &amplitude, &monitors, State::at_rest(rom.tensors.size()))?;
        write_series(out, "trajectory.csv", cfg.load.dt, &resp.names, &resp.series)?;
        out.save("checkpoint.txt", |w| formats::write_checkpoint(w, &resp.final_state))?;
        let p = psds(cfg, &resp.series)?;
        write_psds(out, "psd.csv", &resp.names, &p)?;
        if cfg.integration.hfm_reference {
            let reference = integrate_hfm(cfg, &s, rayleigh, &amplitude, &monitors)?;
            write_series(
                out,
                "hfm_trajectory.csv",
                cfg.load.dt,
                &reference.names,
                &reference.series,
            )?;
            let pr = psds(cfg, &reference.series)?;
            write_psds(out, "hfm_psd.csv", &reference.names, &pr)?;
            psd_deviation_db = Some(compare_psd(&p, &pr, (0.0, cfg.load.cutoff_hz))?);
        }
        phases.integration = t0.elapsed();
    }

    let accounted = phases.basis
        + phases.reduced_mesh
        + phases.fe_queries
        + phases.reading
        + phases.identification
        + phases.transformation
        + phases.integration;
    phases.other = start.elapsed().saturating_sub(accounted);
    let report = BenchmarkReport {
        mode,
        basis_size: b.basis.size(),
        n_elements: s.model.n_elements(),
        reduced_elements: ecsw.as_ref().map(EcswModel::len),
        tangent_queries: id.stats.tangent_queries,
        element_evaluations: id.element_evaluations,
        ecsw_training_residual: ecsw.as_ref().map(|e| e.training_residual),
        ecsw_validation_error: ecsw.as_ref().and_then(|e| e.validation_error),
        tensor_error,
        speedup,
        fe_query_speedup,
        psd_deviation_db,
        phases,
    };
    out.save("report.txt", |w| report.write(w))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub reduced_elements: usize,
    pub percent_elements: f64,
    /// Reduced-force error of the identified tensors against full-mesh
    /// identification, relative RMS over the α-ball.
    pub ecsw_error: f64,
    /// Reduced-mesh solve plus identification time.
    pub t_id: Duration,
    /// Full-mesh identification time over `t_id`.
    pub speedup: f64,
}

/// Reduced mesh and identification for each `τ`, rows by `τ` descending.
pub fn tolerance_sweep(cfg: &PipelineConfig, taus: &[f64]) -> ToolResult<Vec<SweepRow>> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(ToolError::Config("tolerances must lie in (0, 1)".into()));
    }
    let s = setup(cfg)?;
    let b = build_basis(cfg, &s)?;
    let exact = identify(cfg, &s, &b, Mode::Eed, None)?;
    let train = training(cfg, &s, &b)?;
    let samples =
        alpha_ball_samples(&b.basis.v, &s.translational, alpha(cfg, &s), 100, cfg.training.seed).stage("sweep")?;
    let mut sorted = taus.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n_el = s.model.n_elements();
    let mut rows = Vec::with_capacity(sorted.len());
    for tau in sorted {
        let (ecsw, t_mesh) = reduced_mesh(&train, tau)?;
        let id = identify(cfg, &s, &b, Mode::EedEcsw, Some(&ecsw))?;
        let t_id = t_mesh + id.time;
        rows.push(SweepRow {
            tau,
            reduced_elements: ecsw.len(),
            percent_elements: 100.0 * ecsw.len() as f64 / n_el as f64,
            ecsw_error: force_error(&id.tensors, &exact.tensors, &samples),
            t_id,
            speedup: exact.time.as_secs_f64() / t_id.as_secs_f64(),
        });
    }
    Ok(rows)
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> ToolResult<()> {
    let headers: Vec<String> = [
        "tau",
        "reduced_elements",
        "percent_elements",
        "ecsw_error",
        "t_id",
        "speedup",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let col = |f: &dyn Fn(&SweepRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let cols = [
        col(&|r| r.tau),
        col(&|r| r.reduced_elements as f64),
        col(&|r| r.percent_elements),
        col(&|r| r.ecsw_error),
        col(&|r| r.t_id.as_secs_f64()),
        col(&|r| r.speedup),
    ];
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    formats::write_csv(w, &headers, &refs)
}

/// Labels of the selected modes in basis order.
pub fn selected_from_labels(labels: &[BasisLabel]) -> Vec<usize> {
    labels
        .iter()
        .filter_map(|l| match l {
            BasisLabel::Mode(i) => Some(*i),
            BasisLabel::Derivative(..) => None,
        })
        .collect()
}
