//! Unit s-t flow over binary edge selectors, shared by the path-extraction
//! programs.

use crate::dag::{EdgeId, PathVec, ProgramDag};
use crate::milp::{MilpModel, MilpSolution, Relation, Var};

/// Adds one binary `b_e` per edge and constrains the selection to a single
/// s-t path: one unit leaves s and every inner vertex balances.
pub(crate) fn add_path_selectors(model: &mut MilpModel, dag: &ProgramDag) -> Vec<Var> {
    let b: Vec<Var> = (0..dag.edge_count()).map(|e| model.add_binary(format!("b{e}"))).collect();
    let (s, t) = (dag.source(), dag.sink());
    model.add_constraint(
        "leave_s",
        dag.out_edges(s).iter().map(|&e| (b[e], 1.0)),
        Relation::Eq,
        1.0,
    );
    model.add_constraint(
        "enter_t",
        dag.in_edges(t).iter().map(|&e| (b[e], 1.0)),
        Relation::Eq,
        1.0,
    );
    for &v in dag.topo_order() {
        if v == s || v == t {
            continue;
        }
        let terms = dag
            .in_edges(v)
            .iter()
            .map(|&e| (b[e], 1.0))
            .chain(dag.out_edges(v).iter().map(|&e| (b[e], -1.0)));
        model.add_constraint(format!("balance{v}"), terms, Relation::Eq, 0.0);
    }
    b
}

/// `Σ_{e∈edges} b_e ≤ |edges| − 1`: forbids selecting all of `edges` together.
pub(crate) fn add_cut(model: &mut MilpModel, b: &[Var], edges: &[EdgeId], name: String) {
    model.add_constraint(
        name,
        edges.iter().map(|&e| (b[e], 1.0)),
        Relation::Le,
        edges.len() as f64 - 1.0,
    );
}

/// Reads the selected path out of an integral solution.
pub(crate) fn selected_path(dag: &ProgramDag, sol: &MilpSolution, b: &[Var]) -> Option<PathVec> {
    let chosen: Vec<bool> = b.iter().map(|&v| sol.value(v) > 0.5).collect();
    dag.path_from_selection(&chosen)
}
