//! Variable and constraint layout of an OPF problem.
//!
//! Nodes are the buses followed by the lines. A bus node holds its voltage
//! coordinates (and, in rectangular form, two voltage-bound slacks) followed
//! by `(p, q)` of every generator attached to it. A line node holds
//! `(p, q, s)` for each direction of flow: first from→to, then to→from.
//! Each directed half is called an element.

use serde::{Deserialize, Serialize};

use crate::case::NetworkCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Polar,
    Rect,
}

impl std::str::FromStr for Formulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "polar" => Ok(Formulation::Polar),
            "rect" | "rectangular" => Ok(Formulation::Rect),
            _ => Err(format!("unknown formulation '{s}' (expected polar or rect)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpfLayout {
    pub formulation: Formulation,
    pub num_buses: usize,
    pub num_lines: usize,
    pub node_sizes: Vec<usize>,
    pub offsets: Vec<usize>,
    /// `(v, θ)` or `(e, f)` per bus.
    pub voltage: Vec<[usize; 2]>,
    /// `(s_lo, s_up)` per bus; rectangular form only.
    pub voltage_slacks: Vec<Option<[usize; 2]>>,
    /// `(p, q)` per generator.
    pub generator: Vec<[usize; 2]>,
    /// `(p, q, s)` per element; element `2l` runs from→to on line `l`.
    pub element: Vec<[usize; 3]>,
    /// Balance rows `(P, Q)` per bus.
    pub balance_rows: Vec<[usize; 2]>,
    /// Voltage rows `(lower, upper)` per bus; rectangular form only.
    pub voltage_rows: Vec<Option<[usize; 2]>>,
    /// `(P definition, Q definition, thermal)` per element.
    pub element_rows: Vec<[usize; 3]>,
    pub var_names: Vec<String>,
    pub row_names: Vec<String>,
}

impl OpfLayout {
    pub fn new(case: &NetworkCase, formulation: Formulation) -> Self {
        let nb = case.num_buses();
        let nl = case.num_lines();
        let mut node_sizes = Vec::with_capacity(nb + nl);
        let mut offsets = vec![0];
        let mut var_names = Vec::new();
        let mut voltage = Vec::with_capacity(nb);
        let mut voltage_slacks = Vec::with_capacity(nb);
        let mut generator = vec![[0, 0]; case.generators.len()];
        let push = |name: String, names: &mut Vec<String>| {
            names.push(name);
            names.len() - 1
        };
        for (b, bus) in case.buses.iter().enumerate() {
            let id = bus.id;
            let start = var_names.len();
            match formulation {
                Formulation::Polar => {
                    let v = push(format!("v[{id}]"), &mut var_names);
                    let t = push(format!("theta[{id}]"), &mut var_names);
                    voltage.push([v, t]);
                    voltage_slacks.push(None);
                }
                Formulation::Rect => {
                    let e = push(format!("e[{id}]"), &mut var_names);
                    let f = push(format!("f[{id}]"), &mut var_names);
                    let lo = push(format!("s_vlo[{id}]"), &mut var_names);
                    let hi = push(format!("s_vup[{id}]"), &mut var_names);
                    voltage.push([e, f]);
                    voltage_slacks.push(Some([lo, hi]));
                }
            }
            for g in case.generators_at(b) {
                let p = push(format!("pg[{g}]@{id}"), &mut var_names);
                let q = push(format!("qg[{g}]@{id}"), &mut var_names);
                generator[g] = [p, q];
            }
            node_sizes.push(var_names.len() - start);
            offsets.push(var_names.len());
        }
        let mut element = Vec::with_capacity(2 * nl);
        for br in &case.branches {
            let (f, t) = (case.buses[br.from].id, case.buses[br.to].id);
            for (a, b) in [(f, t), (t, f)] {
                let p = push(format!("p[{a}->{b}]"), &mut var_names);
                let q = push(format!("q[{a}->{b}]"), &mut var_names);
                let s = push(format!("s[{a}->{b}]"), &mut var_names);
                element.push([p, q, s]);
            }
            node_sizes.push(6);
            offsets.push(var_names.len());
        }

        let mut row_names = Vec::new();
        let mut balance_rows = Vec::with_capacity(nb);
        let mut voltage_rows = Vec::with_capacity(nb);
        for bus in &case.buses {
            let id = bus.id;
            let p = push(format!("balance_p[{id}]"), &mut row_names);
            let q = push(format!("balance_q[{id}]"), &mut row_names);
            balance_rows.push([p, q]);
            voltage_rows.push(match formulation {
                Formulation::Polar => None,
                Formulation::Rect => {
                    let lo = push(format!("vmin[{id}]"), &mut row_names);
                    let hi = push(format!("vmax[{id}]"), &mut row_names);
                    Some([lo, hi])
                }
            });
        }
        let mut element_rows = Vec::with_capacity(2 * nl);
        for br in &case.branches {
            let (f, t) = (case.buses[br.from].id, case.buses[br.to].id);
            for (a, b) in [(f, t), (t, f)] {
                let p = push(format!("flow_p[{a}->{b}]"), &mut row_names);
                let q = push(format!("flow_q[{a}->{b}]"), &mut row_names);
                let s = push(format!("thermal[{a}->{b}]"), &mut row_names);
                element_rows.push([p, q, s]);
            }
        }

        OpfLayout {
            formulation,
            num_buses: nb,
            num_lines: nl,
            node_sizes,
            offsets,
            voltage,
            voltage_slacks,
            generator,
            element,
            balance_rows,
            voltage_rows,
            element_rows,
            var_names,
            row_names,
        }
    }

    pub fn dim(&self) -> usize {
        self.var_names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_names.len()
    }

    pub fn bus_node(&self, bus: usize) -> usize {
        bus
    }

    pub fn line_node(&self, line: usize) -> usize {
        self.num_buses + line
    }

    /// `(sending bus, receiving bus)` of element `e`.
    pub fn element_ends(&self, case: &NetworkCase, e: usize) -> (usize, usize) {
        let br = &case.branches[e / 2];
        if e % 2 == 0 {
            (br.from, br.to)
        } else {
            (br.to, br.from)
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}
