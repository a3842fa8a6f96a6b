//! Line-based mesh description:
//!
//! ```text
//! # comment
//! node <x> <elevation>
//! elem <n1> <n2>
//! clamp <node>
//! ```
//!
//! Nodes are numbered from 0 in order of appearance. `clamp` fixes all three
//! dofs of a node.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rom_core::fe::{FeModel, Material};

use crate::error::{StageExt, ToolError, ToolResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<(f64, f64)>,
    pub elements: Vec<[usize; 2]>,
    pub clamped: BTreeSet<usize>,
}

impl Mesh {
    /// Uniform clamped-clamped parabolic arch.
    pub fn arch(n_elements: usize, span: f64, rise: f64) -> Self {
        let nodes = (0..=n_elements)
            .map(|i| {
                let x = span * i as f64 / n_elements as f64;
                (x, 4.0 * rise * x * (span - x) / (span * span))
            })
            .collect();
        Self {
            nodes,
            elements: (0..n_elements).map(|e| [e, e + 1]).collect(),
            clamped: [0, n_elements].into_iter().collect(),
        }
    }

    pub fn to_model(&self, material: Material) -> ToolResult<FeModel> {
        let constrained = self
            .clamped
            .iter()
            .flat_map(|&n| (0..3).map(move |k| 3 * n + k))
            .collect();
        FeModel::new(self.nodes.clone(), self.elements.clone(), material, constrained).stage("mesh")
    }

    /// Node closest to mid-span.
    pub fn mid_node(&self) -> usize {
        let (lo, hi) = self
            .nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(x, _)| {
                (a.min(x), b.max(x))
            });
        let mid = 0.5 * (lo + hi);
        (0..self.nodes.len())
            .min_by(|&a, &b| (self.nodes[a].0 - mid).abs().total_cmp(&(self.nodes[b].0 - mid).abs()))
            .unwrap_or(0)
    }
}

pub fn read_mesh<R: BufRead>(reader: R) -> ToolResult<Mesh> {
    let mut mesh = Mesh {
        nodes: Vec::new(),
        elements: Vec::new(),
        clamped: BTreeSet::new(),
    };
    let mut pending: Vec<(usize, Vec<usize>, bool)> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let ln = n + 1;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let words: Vec<&str> = text.split_whitespace().collect();
        let nums = |count: usize| -> ToolResult<Vec<&str>> {
            if words.len() != count + 1 {
                return Err(ToolError::format(
                    ln,
                    format!("{} expects {count} values, found {}", words[0], words.len() - 1),
                ));
            }
            Ok(words[1..].to_vec())
        };
        let float = |w: &str| {
            w.parse::<f64>()
                .map_err(|_| ToolError::format(ln, format!("bad number {w:?}")))
        };
        let index = |w: &str| {
            w.parse::<usize>()
                .map_err(|_| ToolError::format(ln, format!("bad node id {w:?}")))
        };
        match words[0] {
            "node" => {
                let v = nums(2)?;
                mesh.nodes.push((float(v[0])?, float(v[1])?));
            }
            "elem" => {
                let v = nums(2)?;
                pending.push((ln, vec![index(v[0])?, index(v[1])?], true));
            }
            "clamp" => {
                let v = nums(1)?;
                pending.push((ln, vec![index(v[0])?], false));
            }
            other => return Err(ToolError::format(ln, format!("unknown record {other:?}"))),
        }
    }
    // node references may precede the node records
    let n_nodes = mesh.nodes.len();
    for (ln, ids, is_elem) in pending {
        if let Some(&bad) = ids.iter().find(|&&i| i >= n_nodes) {
            return Err(ToolError::format(
                ln,
                format!("node {bad} not defined ({n_nodes} nodes)"),
            ));
        }
        if is_elem {
            mesh.elements.push([ids[0], ids[1]]);
        } else {
            mesh.clamped.insert(ids[0]);
        }
    }
    if mesh.elements.is_empty() {
        return Err(ToolError::format(0, "mesh has no elements"));
    }
    Ok(mesh)
}

pub fn write_mesh<W: Write>(mut w: W, mesh: &Mesh) -> ToolResult<()> {
    for (x, z) in &mesh.nodes {
        writeln!(w, "node {x:e} {z:e}")?;
    }
    for [a, b] in &mesh.elements {
        writeln!(w, "elem {a} {b}")?;
    }
    for n in &mesh.clamped {
        writeln!(w, "clamp {n}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rom_core::fe::StructuralModel;

    #[test]
    fn round_trip_and_model() {
        let mesh = Mesh::arch(6, 0.3, 0.003);
        let mut buf = Vec::new();
        write_mesh(&mut buf, &mesh).unwrap();
        let back = read_mesh(buf.as_slice()).unwrap();
        assert_eq!(back, mesh);
        assert_eq!(back.mid_node(), 3);
        let mat = Material::rectangular(70e9, 2700.0, 0.05, 1e-3).unwrap();
        let a = back.to_model(mat).unwrap();
        let b = FeModel::clamped_arch(6, 0.3, 0.003, mat).unwrap();
        assert_eq!(a.n_dofs(), 15);
        assert_eq!(a.linear_stiffness(), b.linear_stiffness());
    }

    #[test]
    fn comments_and_forward_references() {
        let text = "# two elements\nelem 0 1\nelem 1 2 # trailing\nclamp 0\nnode 0 0\nnode 1 0.1\nnode 2 0\nclamp 2\n";
        let mesh = read_mesh(text.as_bytes()).unwrap();
        assert_eq!(mesh.elements, vec![[0, 1], [1, 2]]);
        assert_eq!(mesh.clamped.len(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        for (text, line) in [
            ("node 0 0\nnode 1\n", 2),
            ("node 0 0\nnode 1 0\nelem 0 5\n", 3),
            ("node 0 0\nbeam 0 1\n", 2),
            ("node 0 x\n", 1),
        ] {
            match read_mesh(text.as_bytes()) {
                Err(ToolError::Format { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(read_mesh("node 0 0\n".as_bytes()).is_err());
    }
}
