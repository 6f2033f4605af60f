//! MATPOWER-style case files.
//!
//! Supported content: `mpc.baseMVA`, and the matrices `mpc.bus`, `mpc.gen`,
//! `mpc.branch` and `mpc.gencost`. Everything else is ignored. Quantities are
//! converted to per unit on `baseMVA`; generator costs stay in the file's
//! units (dollars per MW power) and are applied to `baseMVA · p`.
//!
//! Grammar, informally:
//!
//! ```text
//! file      := (line)*
//! line      := comment | assignment | other
//! comment   := '%' any*               (also allowed after content)
//! assignment:= 'mpc.' name '=' (number ';' | '[' rows ']' ';')
//! rows      := row ((';' | newline) row)*
//! row       := number (whitespace number)*
//! ```

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("missing section mpc.{0}")]
    MissingSection(&'static str),
    #[error("line {line}: branch references unknown bus {bus}")]
    DanglingBus { line: usize, bus: i64 },
    #[error("baseMVA must be positive, got {0}")]
    NonPositiveBase(f64),
    #[error("line {line}: {msg}")]
    Unsupported { line: usize, msg: String },
    #[error("network is not connected: bus {0} cannot be reached from bus {1}")]
    Disconnected(i64, i64),
    #[error("line {line}: {msg}")]
    InvalidData { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bus {
    /// Identifier used in the file.
    pub id: i64,
    pub kind: u8,
    pub pd: f64,
    pub qd: f64,
    /// Shunt conductance and susceptance at 1 pu voltage.
    pub gs: f64,
    pub bs: f64,
    pub vm: f64,
    pub va: f64,
    pub vmin: f64,
    pub vmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    /// Internal bus indices.
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub charging: f64,
    /// Thermal limit in pu; `None` when the file gives 0 (unlimited).
    pub rate: Option<f64>,
    /// Series admittance `g + jb = 1 / (r + jx)`.
    pub g: f64,
    pub b: f64,
}

impl Branch {
    /// Self terms `(G_bb, B_bb)` of the π model seen from either end.
    pub fn self_terms(&self) -> (f64, f64) {
        (self.g, self.b + 0.5 * self.charging)
    }

    /// Mutual terms `(G_bb', B_bb')`.
    pub fn mutual_terms(&self) -> (f64, f64) {
        (-self.g, -self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Generator {
    pub bus: usize,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    /// Cost `c2 P² + c1 P + c0` with `P` in MW.
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

/// Flow limit used for branches without a rating.
pub const UNLIMITED_RATE: f64 = 100.0;

impl NetworkCase {
    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn num_lines(&self) -> usize {
        self.branches.len()
    }

    /// Index of the reference bus: the first of type 3, else bus 0.
    pub fn reference_bus(&self) -> usize {
        self.buses.iter().position(|b| b.kind == 3).unwrap_or(0)
    }

    /// `(bus, P^D, Q^D)` for buses with demand.
    pub fn loads(&self) -> Vec<(usize, f64, f64)> {
        self.buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.pd != 0.0 || b.qd != 0.0)
            .map(|(i, b)| (i, b.pd, b.qd))
            .collect()
    }

    pub fn generators_at(&self, bus: usize) -> Vec<usize> {
        (0..self.generators.len())
            .filter(|&g| self.generators[g].bus == bus)
            .collect()
    }

    pub fn bus_index(&self, id: i64) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn rate(&self, line: usize) -> f64 {
        self.branches[line].rate.unwrap_or(UNLIMITED_RATE)
    }
}

struct Matrix {
    rows: Vec<(usize, Vec<f64>)>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_numbers(text: &str, line: usize) -> Result<Vec<f64>, CaseError> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|_| CaseError::Malformed {
                line,
                msg: format!("expected a number, found '{t}'"),
            })
        })
        .collect()
}

fn scan(text: &str) -> Result<(HashMap<String, (usize, f64)>, HashMap<String, Matrix>), CaseError> {
    let mut scalars = HashMap::new();
    let mut matrices: HashMap<String, Matrix> = HashMap::new();
    let mut open: Option<(String, usize, Matrix)> = None;
    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let mut line = strip_comment(raw).trim();
        if open.is_none() {
            let Some(rest) = line.strip_prefix("mpc.") else {
                continue;
            };
            let Some(eq) = rest.find('=') else {
                continue;
            };
            let name = rest[..eq].trim().to_string();
            let rhs = rest[eq + 1..].trim();
            if let Some(body) = rhs.strip_prefix('[') {
                open = Some((name, ln, Matrix { rows: Vec::new() }));
                line = body;
            } else {
                let v = rhs.trim_end_matches(';').trim();
                if v.starts_with('\'') {
                    continue;
                }
                let val = v.parse::<f64>().map_err(|_| CaseError::Malformed {
                    line: ln,
                    msg: format!("cannot read value of mpc.{name}: '{v}'"),
                })?;
                scalars.insert(name, (ln, val));
                continue;
            }
        }
        let (name, _, mat) = open.as_mut().unwrap();
        let (body, closed) = match line.find(']') {
            Some(i) => (&line[..i], true),
            None => (line, false),
        };
        for chunk in body.split(';') {
            let nums = parse_numbers(chunk, ln)?;
            if !nums.is_empty() {
                mat.rows.push((ln, nums));
            }
        }
        if closed {
            let (name, _, mat) = open.take().unwrap();
            matrices.insert(name, mat);
        } else if line.contains("mpc.") {
            return Err(CaseError::Malformed {
                line: ln,
                msg: format!("matrix mpc.{name} is not closed"),
            });
        }
    }
    if let Some((name, ln, _)) = open {
        return Err(CaseError::Malformed {
            line: ln,
            msg: format!("matrix mpc.{name} is not closed"),
        });
    }
    Ok((scalars, matrices))
}

fn need(row: &(usize, Vec<f64>), cols: usize, what: &str) -> Result<(), CaseError> {
    if row.1.len() < cols {
        return Err(CaseError::Malformed {
            line: row.0,
            msg: format!("{what} row needs at least {cols} columns, found {}", row.1.len()),
        });
    }
    Ok(())
}

/// Parses a case file into per-unit data.
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    let (scalars, mut matrices) = scan(text)?;
    let &(_, base) = scalars
        .get("baseMVA")
        .ok_or(CaseError::MissingSection("baseMVA"))?;
    if !(base > 0.0) {
        return Err(CaseError::NonPositiveBase(base));
    }
    let bus_m = matrices.remove("bus").ok_or(CaseError::MissingSection("bus"))?;
    let gen_m = matrices.remove("gen").ok_or(CaseError::MissingSection("gen"))?;
    let br_m = matrices
        .remove("branch")
        .ok_or(CaseError::MissingSection("branch"))?;
    let cost_m = matrices
        .remove("gencost")
        .ok_or(CaseError::MissingSection("gencost"))?;

    let mut buses = Vec::new();
    let mut index = HashMap::new();
    for row in &bus_m.rows {
        need(row, 13, "bus")?;
        let c = &row.1;
        let id = c[0] as i64;
        if index.insert(id, buses.len()).is_some() {
            return Err(CaseError::InvalidData {
                line: row.0,
                msg: format!("bus {id} defined twice"),
            });
        }
        let (vmax, vmin) = (c[11], c[12]);
        if vmin > vmax {
            return Err(CaseError::InvalidData {
                line: row.0,
                msg: format!("bus {id} has Vmin {vmin} > Vmax {vmax}"),
            });
        }
        buses.push(Bus {
            id,
            kind: c[1] as u8,
            pd: c[2] / base,
            qd: c[3] / base,
            gs: c[4] / base,
            bs: c[5] / base,
            vm: c[7],
            va: c[8].to_radians(),
            vmin,
            vmax,
        });
    }
    let lookup = |id: f64, line: usize| -> Result<usize, CaseError> {
        index.get(&(id as i64)).copied().ok_or(CaseError::DanglingBus {
            line,
            bus: id as i64,
        })
    };

    let mut branches = Vec::new();
    for row in &br_m.rows {
        need(row, 11, "branch")?;
        let c = &row.1;
        if c[10] == 0.0 {
            continue;
        }
        let from = lookup(c[0], row.0)?;
        let to = lookup(c[1], row.0)?;
        if from == to {
            return Err(CaseError::InvalidData {
                line: row.0,
                msg: format!("branch connects bus {} to itself", c[0]),
            });
        }
        if (c[8] != 0.0 && c[8] != 1.0) || c[9] != 0.0 {
            return Err(CaseError::Unsupported {
                line: row.0,
                msg: "off-nominal tap ratios and phase shifters are not supported".into(),
            });
        }
        let (r, x) = (c[2], c[3]);
        let den = r * r + x * x;
        if den == 0.0 {
            return Err(CaseError::InvalidData {
                line: row.0,
                msg: "branch has zero impedance".into(),
            });
        }
        branches.push(Branch {
            from,
            to,
            r,
            x,
            charging: c[4],
            rate: (c[5] > 0.0).then(|| c[5] / base),
            g: r / den,
            b: -x / den,
        });
    }

    let mut generators = Vec::new();
    let mut gen_lines = Vec::new();
    for row in &gen_m.rows {
        need(row, 10, "gen")?;
        let c = &row.1;
        gen_lines.push((row.0, c[7] != 0.0));
        if c[7] == 0.0 {
            continue;
        }
        let bus = lookup(c[0], row.0)?;
        let (pmax, pmin, qmax, qmin) = (c[8] / base, c[9] / base, c[3] / base, c[4] / base);
        if pmin > pmax || qmin > qmax {
            return Err(CaseError::InvalidData {
                line: row.0,
                msg: "generator bounds are inverted".into(),
            });
        }
        generators.push(Generator {
            bus,
            pmin,
            pmax,
            qmin,
            qmax,
            c2: 0.0,
            c1: 0.0,
            c0: 0.0,
        });
    }
    if cost_m.rows.len() < gen_lines.len() {
        return Err(CaseError::Malformed {
            line: cost_m.rows.last().map_or(0, |r| r.0),
            msg: format!(
                "{} gencost rows for {} generators",
                cost_m.rows.len(),
                gen_lines.len()
            ),
        });
    }
    let mut g = 0;
    for (row, &(_, active)) in cost_m.rows.iter().zip(&gen_lines) {
        need(row, 4, "gencost")?;
        let c = &row.1;
        if c[0] != 2.0 {
            return Err(CaseError::Unsupported {
                line: row.0,
                msg: "only polynomial costs (model 2) are supported".into(),
            });
        }
        let ncoef = c[3] as usize;
        if ncoef > 3 || c.len() < 4 + ncoef {
            return Err(CaseError::Unsupported {
                line: row.0,
                msg: format!("polynomial cost with {ncoef} coefficients"),
            });
        }
        if !active {
            continue;
        }
        // Coefficients are listed from the highest power down.
        let coef = &c[4..4 + ncoef];
        let mut padded = [0.0; 3];
        padded[3 - ncoef..].copy_from_slice(coef);
        generators[g].c2 = padded[0];
        generators[g].c1 = padded[1];
        generators[g].c0 = padded[2];
        g += 1;
    }

    let case = NetworkCase {
        base_mva: base,
        buses,
        branches,
        generators,
    };
    check_connected(&case)?;
    Ok(case)
}

fn check_connected(case: &NetworkCase) -> Result<(), CaseError> {
    let n = case.num_buses();
    if n == 0 {
        return Err(CaseError::MissingSection("bus"));
    }
    let mut adj = vec![Vec::new(); n];
    for br in &case.branches {
        adj[br.from].push(br.to);
        adj[br.to].push(br.from);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(CaseError::Disconnected(case.buses[i].id, case.buses[0].id)),
        None => Ok(()),
    }
}

pub const CASE9: &str = include_str!("../data/case9.m");
pub const TOY2: &str = include_str!("../data/toy2.m");
pub const STAR3: &str = include_str!("../data/star3.m");

/// Bundled cases by name.
pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "case9" => Some(CASE9),
        "toy2" => Some(TOY2),
        "star3" => Some(STAR3),
        _ => None,
    }
}
