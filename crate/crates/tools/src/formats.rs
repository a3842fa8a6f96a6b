//! Text artifacts. Floats are written in shortest round-trip form, so
//! reading a file back reproduces the values bit for bit.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rom_core::ecsw::EcswModel;
use rom_core::fe::Vec6;
use rom_core::manifold::TrainingSets;
use rom_core::modal::BasisLabel;
use rom_core::reduced::{BasisTag, TensorSet};
use rom_core::rom::State;

use crate::error::{ToolError, ToolResult};

pub fn create(path: &Path) -> ToolResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| ToolError::from(e).at(dir))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| ToolError::from(e).at(path))?,
    ))
}

pub fn open(path: &Path) -> ToolResult<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| ToolError::from(e).at(path))?,
    ))
}

/// Runs a writer against a freshly created file, tagging errors with its path.
pub fn save(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> ToolResult<()>) -> ToolResult<()> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush().map_err(Into::into))
        .map_err(|e| e.at(path))
}

pub fn load<T>(path: &Path, f: impl FnOnce(BufReader<File>) -> ToolResult<T>) -> ToolResult<T> {
    f(open(path)?).map_err(|e| e.at(path))
}

fn parse_f64(line: usize, w: &str) -> ToolResult<f64> {
    w.parse()
        .map_err(|_| ToolError::format(line, format!("bad number {w:?}")))
}

fn parse_usize(line: usize, w: &str) -> ToolResult<usize> {
    w.parse()
        .map_err(|_| ToolError::format(line, format!("bad integer {w:?}")))
}

/// Non-blank, non-comment lines as `(line number, words)`.
fn records<R: BufRead>(reader: R) -> ToolResult<Vec<(usize, Vec<String>)>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push((n + 1, t.split_whitespace().map(String::from).collect()));
    }
    Ok(out)
}

pub fn write_vector<W: Write>(mut w: W, v: &DVector<f64>) -> ToolResult<()> {
    for x in v.iter() {
        writeln!(w, "{x:e}")?;
    }
    Ok(())
}

pub fn read_vector<R: BufRead>(reader: R) -> ToolResult<DVector<f64>> {
    let mut out = Vec::new();
    for (ln, words) in records(reader)? {
        for w in words {
            out.push(parse_f64(ln, &w)?);
        }
    }
    Ok(DVector::from_vec(out))
}

pub fn parse_basis_tag(line: usize, s: &str) -> ToolResult<BasisTag> {
    match s {
        "V" => Ok(BasisTag::V),
        "W" => Ok(BasisTag::W),
        other => Err(ToolError::format(line, format!("unknown basis tag {other:?}"))),
    }
}

/// `tensorset <m> <basis>` then `order i j [k [l]] value` lines for the
/// nonzero coefficients, sorted by order and indices.
pub fn write_tensors<W: Write>(mut w: W, t: &TensorSet) -> ToolResult<()> {
    let m = t.size();
    writeln!(w, "tensorset {m} {}", t.basis)?;
    for i in 0..m {
        for j in 0..m {
            let v = t.k1[(i, j)];
            if v != 0.0 {
                writeln!(w, "1 {i} {j} {v:e}")?;
            }
        }
    }
    let mut quad = t.quadratic_entries();
    quad.sort_by_key(|&(i, j, k, _)| (i, j, k));
    for (i, j, k, v) in quad {
        if v != 0.0 {
            writeln!(w, "2 {i} {j} {k} {v:e}")?;
        }
    }
    let mut cub = t.cubic_entries();
    cub.sort_by_key(|&(i, j, k, l, _)| (i, j, k, l));
    for (i, j, k, l, v) in cub {
        if v != 0.0 {
            writeln!(w, "3 {i} {j} {k} {l} {v:e}")?;
        }
    }
    Ok(())
}

pub fn read_tensors<R: BufRead>(reader: R) -> ToolResult<TensorSet> {
    let recs = records(reader)?;
    let mut it = recs.into_iter();
    let (ln, head) = it.next().ok_or_else(|| ToolError::format(1, "empty tensor file"))?;
    if head.len() != 3 || head[0] != "tensorset" {
        return Err(ToolError::format(ln, "expected `tensorset <m> <basis>`"));
    }
    let m = parse_usize(ln, &head[1])?;
    let tag = parse_basis_tag(ln, &head[2])?;
    let mut t = TensorSet::new(DMatrix::zeros(m, m), tag).map_err(|e| ToolError::format(ln, e.to_string()))?;
    for (ln, words) in it {
        let order = parse_usize(ln, &words[0])?;
        if !(1..=3).contains(&order) || words.len() != order + 3 {
            return Err(ToolError::format(ln, format!("malformed order-{order} entry")));
        }
        let idx: Vec<usize> = words[1..=order + 1]
            .iter()
            .map(|w| parse_usize(ln, w))
            .collect::<ToolResult<_>>()?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(ToolError::format(ln, format!("index {bad} outside 0..{m}")));
        }
        let v = parse_f64(ln, &words[order + 2])?;
        let res = match order {
            1 => {
                t.k1[(idx[0], idx[1])] = v;
                Ok(())
            }
            2 => t.set_k2(idx[0], idx[1], idx[2], v),
            _ => t.set_k3(idx[0], idx[1], idx[2], idx[3], v),
        };
        res.map_err(|e| ToolError::format(ln, e.to_string()))?;
    }
    Ok(t)
}

/// Header lines, then `element_id weight` per reduced-mesh element.
pub fn write_ecsw<W: Write>(mut w: W, ecsw: &EcswModel, n_elements: usize) -> ToolResult<()> {
    writeln!(w, "ecsw")?;
    writeln!(w, "tolerance {:e}", ecsw.tolerance)?;
    writeln!(w, "training_residual {:e}", ecsw.training_residual)?;
    match ecsw.validation_error {
        Some(e) => writeln!(w, "validation_error {e:e}")?,
        None => writeln!(w, "validation_error none")?,
    }
    writeln!(w, "elements {} {n_elements}", ecsw.len())?;
    write!(w, "history")?;
    for r in &ecsw.residual_history {
        write!(w, " {r:e}")?;
    }
    writeln!(w)?;
    for (e, x) in ecsw.elements.iter().zip(&ecsw.weights) {
        writeln!(w, "{e} {x:e}")?;
    }
    Ok(())
}

/// Returns the model and the element count of the mesh it was trained on.
pub fn read_ecsw<R: BufRead>(reader: R) -> ToolResult<(EcswModel, usize)> {
    let recs = records(reader)?;
    let mut it = recs.into_iter();
    let mut field = |name: &str| -> ToolResult<(usize, Vec<String>)> {
        match it.next() {
            Some((ln, words)) if words.first().map(String::as_str) == Some(name) => Ok((ln, words)),
            Some((ln, _)) => Err(ToolError::format(ln, format!("expected `{name}`"))),
            None => Err(ToolError::format(0, format!("missing `{name}`"))),
        }
    };
    field("ecsw")?;
    let one = |(ln, w): (usize, Vec<String>)| -> ToolResult<(usize, String)> {
        if w.len() != 2 {
            return Err(ToolError::format(ln, format!("`{}` takes one value", w[0])));
        }
        Ok((ln, w[1].clone()))
    };
    let (ln, v) = one(field("tolerance")?)?;
    let tolerance = parse_f64(ln, &v)?;
    let (ln, v) = one(field("training_residual")?)?;
    let training_residual = parse_f64(ln, &v)?;
    let (ln, v) = one(field("validation_error")?)?;
    let validation_error = if v == "none" { None } else { Some(parse_f64(ln, &v)?) };
    let (ln, words) = field("elements")?;
    if words.len() != 3 {
        return Err(ToolError::format(ln, "expected `elements <count> <total>`"));
    }
    let count = parse_usize(ln, &words[1])?;
    let total = parse_usize(ln, &words[2])?;
    let (ln, words) = field("history")?;
    let residual_history = words[1..].iter().map(|w| parse_f64(ln, w)).collect::<ToolResult<_>>()?;
    let mut elements = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for (ln, words) in it {
        if words.len() != 2 {
            return Err(ToolError::format(ln, "expected `element_id weight`"));
        }
        let e = parse_usize(ln, &words[0])?;
        if e >= total {
            return Err(ToolError::format(ln, format!("element {e} outside 0..{total}")));
        }
        let x = parse_f64(ln, &words[1])?;
        if !(x > 0.0) {
            return Err(ToolError::format(ln, format!("weight must be positive, got {x}")));
        }
        elements.push(e);
        weights.push(x);
    }
    if elements.len() != count {
        return Err(ToolError::format(
            0,
            format!("declared {count} elements, found {}", elements.len()),
        ));
    }
    Ok((
        EcswModel {
            elements,
            weights,
            tolerance,
            training_residual,
            validation_error,
            residual_history,
        },
        total,
    ))
}

pub fn write_labels<W: Write>(mut w: W, labels: &[BasisLabel]) -> ToolResult<()> {
    for l in labels {
        match l {
            BasisLabel::Mode(i) => writeln!(w, "mode {i}")?,
            BasisLabel::Derivative(i, j) => writeln!(w, "smd {i} {j}")?,
        }
    }
    Ok(())
}

pub fn read_labels<R: BufRead>(reader: R) -> ToolResult<Vec<BasisLabel>> {
    records(reader)?
        .into_iter()
        .map(|(ln, w)| match (w[0].as_str(), w.len()) {
            ("mode", 2) => Ok(BasisLabel::Mode(parse_usize(ln, &w[1])?)),
            ("smd", 3) => Ok(BasisLabel::Derivative(parse_usize(ln, &w[1])?, parse_usize(ln, &w[2])?)),
            _ => Err(ToolError::format(ln, "expected `mode i` or `smd i j`")),
        })
        .collect()
}

/// Restart file: step index and the three state vectors.
pub fn write_checkpoint<W: Write>(mut w: W, s: &State) -> ToolResult<()> {
    writeln!(w, "checkpoint {}", s.displacement.len())?;
    writeln!(w, "step {}", s.step)?;
    for (name, v) in [
        ("displacement", &s.displacement),
        ("velocity", &s.velocity),
        ("acceleration", &s.acceleration),
    ] {
        write!(w, "{name}")?;
        for x in v.iter() {
            write!(w, " {x:e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(reader: R) -> ToolResult<State> {
    let recs = records(reader)?;
    if recs.len() != 5 {
        return Err(ToolError::format(
            0,
            format!("checkpoint has {} records, expected 5", recs.len()),
        ));
    }
    let expect = |k: usize, name: &str| -> ToolResult<&[String]> {
        let (ln, w) = &recs[k];
        if w[0] != name {
            return Err(ToolError::format(*ln, format!("expected `{name}`")));
        }
        Ok(&w[1..])
    };
    let n = parse_usize(recs[0].0, expect(0, "checkpoint")?.first().map_or("", String::as_str))?;
    let step = parse_usize(recs[1].0, expect(1, "step")?.first().map_or("", String::as_str))?;
    let vec = |k: usize, name: &str| -> ToolResult<DVector<f64>> {
        let vals: Vec<f64> = expect(k, name)?
            .iter()
            .map(|w| parse_f64(recs[k].0, w))
            .collect::<ToolResult<_>>()?;
        if vals.len() != n {
            return Err(ToolError::format(
                recs[k].0,
                format!("{name} has {} entries, expected {n}", vals.len()),
            ));
        }
        Ok(DVector::from_vec(vals))
    };
    Ok(State {
        step,
        displacement: vec(2, "displacement")?,
        velocity: vec(3, "velocity")?,
        acceleration: vec(4, "acceleration")?,
    })
}

fn snapshot_name(k: usize) -> String {
    format!("snapshot_{k:05}")
}

/// Directory with `manifest.txt` (split sizes, seed, manifold coordinates)
/// and per snapshot a `.forces` file of `element_id f1 … f6` lines and a
/// `.disp` displacement vector.
pub fn write_snapshots(dir: &Path, t: &TrainingSets) -> ToolResult<()> {
    save(&dir.join("manifest.txt"), |w| {
        writeln!(w, "snapshots {} {}", t.n_train, t.n_validate)?;
        writeln!(w, "seed {}", t.seed)?;
        for (k, g) in t.gammas.iter().enumerate() {
            write!(w, "gamma {k}")?;
            for x in g.iter() {
                write!(w, " {x:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    for (k, (q, forces)) in t.displacements.iter().zip(&t.nonlinear_forces).enumerate() {
        let name = snapshot_name(k);
        save(&dir.join(format!("{name}.forces")), |w| {
            for (e, f) in forces.iter().enumerate() {
                write!(w, "{e}")?;
                for x in f.iter() {
                    write!(w, " {x:e}")?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
        save(&dir.join(format!("{name}.disp")), |w| write_vector(w, q))?;
    }
    Ok(())
}

pub fn read_snapshots(dir: &Path) -> ToolResult<TrainingSets> {
    let manifest = dir.join("manifest.txt");
    let recs = load(&manifest, records)?;
    let bad = |ln: usize, msg: &str| ToolError::format(ln, msg.to_string()).at(&manifest);
    let (ln, head) = recs.first().ok_or_else(|| bad(0, "empty manifest"))?;
    if head.len() != 3 || head[0] != "snapshots" {
        return Err(bad(*ln, "expected `snapshots <n_train> <n_validate>`"));
    }
    let n_train = parse_usize(*ln, &head[1]).map_err(|e| e.at(&manifest))?;
    let n_validate = parse_usize(*ln, &head[2]).map_err(|e| e.at(&manifest))?;
    let (ln, seed) = recs.get(1).ok_or_else(|| bad(0, "missing seed"))?;
    if seed.len() != 2 || seed[0] != "seed" {
        return Err(bad(*ln, "expected `seed <value>`"));
    }
    let seed: u64 = seed[1].parse().map_err(|_| bad(*ln, "bad seed"))?;
    let total = n_train + n_validate;
    if recs.len() != 2 + total {
        return Err(bad(0, "gamma count does not match split sizes"));
    }
    let mut gammas = Vec::with_capacity(total);
    for (k, (ln, w)) in recs[2..].iter().enumerate() {
        if w.len() < 2 || w[0] != "gamma" || w[1] != k.to_string() {
            return Err(bad(*ln, &format!("expected `gamma {k} …`")));
        }
        let g: Vec<f64> = w[2..]
            .iter()
            .map(|x| parse_f64(*ln, x))
            .collect::<ToolResult<_>>()
            .map_err(|e| e.at(&manifest))?;
        gammas.push(DVector::from_vec(g));
    }
    let mut displacements = Vec::with_capacity(total);
    let mut nonlinear_forces = Vec::with_capacity(total);
    for k in 0..total {
        let name = snapshot_name(k);
        let fpath = dir.join(format!("{name}.forces"));
        let forces = load(&fpath, |r| {
            records(r)?
                .into_iter()
                .enumerate()
                .map(|(e, (ln, w))| {
                    if w.len() != 7 || parse_usize(ln, &w[0])? != e {
                        return Err(ToolError::format(ln, format!("expected `{e} f1 … f6`")));
                    }
                    let vals: Vec<f64> = w[1..].iter().map(|x| parse_f64(ln, x)).collect::<ToolResult<_>>()?;
                    Ok(Vec6::from_column_slice(&vals))
                })
                .collect::<ToolResult<Vec<_>>>()
        })?;
        nonlinear_forces.push(forces);
        displacements.push(load(&dir.join(format!("{name}.disp")), read_vector)?);
    }
    Ok(TrainingSets {
        gammas,
        seed,
        displacements,
        nonlinear_forces,
        n_train,
        n_validate,
    })
}

/// Named columns of equal length.
/// Plain notation for integers and moderate magnitudes, exponent otherwise;
/// both forms read back exactly.
fn csv_number(x: f64) -> String {
    let a = x.abs();
    if x.fract() == 0.0 && a < 1e15 || (1e-3..1e6).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn write_csv<W: Write>(w: W, headers: &[String], columns: &[&[f64]]) -> ToolResult<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.len() != headers.len() || columns.iter().any(|c| c.len() != rows) {
        return Err(ToolError::Config(
            "CSV columns must match headers and have equal length".into(),
        ));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(headers).map_err(csv_error)?;
    let mut record = Vec::with_capacity(columns.len());
    for r in 0..rows {
        record.clear();
        record.extend(columns.iter().map(|c| csv_number(c[r])));
        out.write_record(&record).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(r: R) -> ToolResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rd = csv::Reader::from_reader(r);
    let headers: Vec<String> = rd.headers().map_err(csv_error)?.iter().map(String::from).collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for (n, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        for (c, field) in rec.iter().enumerate() {
            columns[c].push(parse_f64(n + 2, field.trim())?);
        }
    }
    Ok((headers, columns))
}

fn csv_error(e: csv::Error) -> ToolError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    ToolError::format(line, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_tensors() -> TensorSet {
        let mut t = TensorSet::new(
            DMatrix::from_fn(3, 3, |i, j| 1.0 / (1.0 + i as f64 + j as f64)),
            BasisTag::W,
        )
        .unwrap();
        t.set_k2(1, 2, 0, -0.1).unwrap();
        t.set_k2(0, 1, 1, 1e-17).unwrap();
        t.set_k3(2, 2, 0, 1, 3.0_f64.sqrt()).unwrap();
        t
    }

    #[test]
    fn tensor_round_trip_and_bytes_are_stable() {
        let t = sample_tensors();
        let mut a = Vec::new();
        write_tensors(&mut a, &t).unwrap();
        let back = read_tensors(a.as_slice()).unwrap();
        assert_eq!(back, t);
        let mut b = Vec::new();
        write_tensors(&mut b, &back).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("tensorset 3 W\n"));
        assert!(text.contains("\n2 1 0 2 -1e-1\n"));
    }

    #[test]
    fn tensor_errors() {
        for text in [
            "",
            "tensorset x V\n",
            "tensorset 2 Q\n",
            "tensorset 2 V\n2 0 0 5 1\n",
            "tensorset 2 V\n4 0 0 0 0 0 1\n",
        ] {
            assert!(read_tensors(text.as_bytes()).is_err(), "{text:?}");
        }
    }

    #[test]
    fn ecsw_round_trip() {
        let m = EcswModel {
            elements: vec![3, 17, 40],
            weights: vec![1.5, 0.25, 7.0 / 3.0],
            tolerance: 1e-3,
            training_residual: 9.1e-4,
            validation_error: Some(2e-3),
            residual_history: vec![1.0, 0.5, 0.1],
        };
        let mut buf = Vec::new();
        write_ecsw(&mut buf, &m, 60).unwrap();
        assert_eq!(read_ecsw(buf.as_slice()).unwrap(), (m.clone(), 60));
        let none = EcswModel {
            validation_error: None,
            ..m
        };
        let mut buf = Vec::new();
        write_ecsw(&mut buf, &none, 60).unwrap();
        assert_eq!(read_ecsw(buf.as_slice()).unwrap().0, none);
        let bad = String::from_utf8(buf).unwrap().replace("40 ", "99 ");
        assert!(read_ecsw(bad.as_bytes()).is_err());
    }

    #[test]
    fn checkpoint_and_labels_round_trip() {
        let s = State {
            step: 42,
            displacement: DVector::from_vec(vec![1e-3, -2.0]),
            velocity: DVector::from_vec(vec![0.1, 1.0 / 7.0]),
            acceleration: DVector::from_vec(vec![-5.0, 0.0]),
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &s).unwrap();
        assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), s);
        let labels = vec![BasisLabel::Mode(2), BasisLabel::Derivative(2, 5)];
        let mut buf = Vec::new();
        write_labels(&mut buf, &labels).unwrap();
        assert_eq!(read_labels(buf.as_slice()).unwrap(), labels);
    }

    #[test]
    fn csv_round_trip() {
        let t = [0.0, 0.5, 1.0];
        let x = [1.0 / 3.0, -2e-9, 7.0];
        let mut buf = Vec::new();
        write_csv(&mut buf, &["t".into(), "a".into()], &[&t, &x]).unwrap();
        let (h, cols) = read_csv(buf.as_slice()).unwrap();
        assert_eq!(h, vec!["t", "a"]);
        assert_eq!(cols, vec![t.to_vec(), x.to_vec()]);
    }

    #[test]
    fn snapshot_archive_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = TrainingSets {
            gammas: vec![DVector::from_vec(vec![0.1, -0.2]); 3],
            seed: 11,
            displacements: vec![DVector::from_vec(vec![1.0, 2.0, 3.0]); 3],
            nonlinear_forces: vec![vec![Vec6::from_fn(|i, _| i as f64 / 3.0); 4]; 3],
            n_train: 2,
            n_validate: 1,
        };
        write_snapshots(dir.path(), &t).unwrap();
        let back = read_snapshots(dir.path()).unwrap();
        assert_eq!(back.gammas, t.gammas);
        assert_eq!(back.seed, 11);
        assert_eq!(back.displacements, t.displacements);
        assert_eq!(back.nonlinear_forces, t.nonlinear_forces);
        assert_eq!((back.n_train, back.n_validate), (2, 1));
    }
}
