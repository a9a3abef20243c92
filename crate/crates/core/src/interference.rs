//! Interference graphs over program variables and greedy coloring.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::ir::Program;
use crate::liveness::{ControlFlow, LivenessMap, VarSet};

/// Undirected simple graph with named vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    names: Vec<String>,
    adjacency: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn new(names: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let adjacency = vec![BTreeSet::new(); names.len()];
        Graph { names, adjacency }
    }

    /// Adds the edge `{a, b}`; self-loops are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adjacency[a].insert(b);
            self.adjacency[b].insert(a);
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.vertex_count()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(&b)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph interference {\n");
        for name in &self.names {
            let _ = writeln!(out, "  \"{name}\";");
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "  \"{}\" -- \"{}\";", self.names[a], self.names[b]);
        }
        out.push_str("}\n");
        out
    }

    fn connect_all(&mut self, vars: &VarSet) {
        let idx: Vec<usize> = vars.iter().filter_map(|v| self.index_of(v)).collect();
        for (i, &a) in idx.iter().enumerate() {
            for &b in &idx[i + 1..] {
                self.add_edge(a, b);
            }
        }
    }
}

/// Builds the interference graph: two variables interfere if both are live
/// at the initial location, or both are live across the successors of some
/// command. Live sets of command sets are unions.
pub fn build_ig(program: &Program, live: &LivenessMap) -> Graph {
    let mut graph = Graph::new(program.var_names());
    graph.connect_all(&live.at_location(program, 0));
    let cf = ControlFlow::new(program);
    for pos in 0..program.commands.len() {
        let across = live.union_of(cf.succ(pos).iter().copied());
        graph.connect_all(&across);
    }
    graph
}

/// A proper vertex coloring with colors `1..=color_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorAssignment {
    colors: Vec<usize>,
    color_count: usize,
}

impl ColorAssignment {
    pub fn color(&self, v: usize) -> usize {
        self.colors[v]
    }

    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn color_count(&self) -> usize {
        self.color_count
    }

    /// True iff no edge joins two vertices of the same color.
    pub fn is_proper(&self, graph: &Graph) -> bool {
        graph.edges().all(|(a, b)| self.colors[a] != self.colors[b])
    }
}

/// Welsh-Powell greedy coloring. Vertices are ordered by non-increasing
/// degree, ties by vertex index; each color in turn is given to every
/// still-uncolored vertex without a neighbour of that color.
pub fn welsh_powell(graph: &Graph) -> ColorAssignment {
    let n = graph.vertex_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| graph.degree(b).cmp(&graph.degree(a)).then(a.cmp(&b)));

    let mut colors = vec![0usize; n];
    let mut remaining = n;
    let mut color = 0;
    while remaining > 0 {
        color += 1;
        for &v in &order {
            if colors[v] == 0 && graph.neighbors(v).iter().all(|&u| colors[u] != color) {
                colors[v] = color;
                remaining -= 1;
            }
        }
    }
    ColorAssignment {
        colors,
        color_count: color,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_default;
    use crate::liveness::lra;
    use crate::models::BSP_SOURCE;
    use proptest::prelude::*;

    fn complete(n: usize) -> Graph {
        let mut g = Graph::new((0..n).map(|i| format!("v{i}")));
        for a in 0..n {
            for b in a + 1..n {
                g.add_edge(a, b);
            }
        }
        g
    }

    #[test]
    fn clique_needs_all_colors() {
        let c = welsh_powell(&complete(3));
        assert_eq!(c.color_count(), 3);
        assert!(c.is_proper(&complete(3)));
    }

    #[test]
    fn edgeless_graph_uses_one_color() {
        let g = Graph::new(["a", "b", "c", "d"]);
        let c = welsh_powell(&g);
        assert_eq!(c.colors(), &[1, 1, 1, 1]);
        assert_eq!(c.color_count(), 1);
    }

    #[test]
    fn path_is_two_colored_from_the_middle() {
        let mut g = Graph::new(["a", "b", "c"]);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        let c = welsh_powell(&g);
        assert_eq!(c.colors(), &[2, 1, 2]);
        assert_eq!(c.color_count(), 2);
    }

    #[test]
    fn empty_graph() {
        let c = welsh_powell(&Graph::new(Vec::<String>::new()));
        assert_eq!(c.color_count(), 0);
    }

    #[test]
    fn running_example_has_no_interference() {
        let p = parse_default(BSP_SOURCE).unwrap();
        let g = build_ig(&p, &lra(&p));
        assert_eq!(g.names(), &["x", "y"]);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(welsh_powell(&g).colors(), &[1, 1]);
    }

    #[test]
    fn jointly_read_initial_variables_interfere() {
        let src = "dtmc module m cf : [0..0] init 0; a : [0..1] init 0; b : [0..1] init 0;\n\
                   [] cf=0 & a=b -> 1:(cf'=0); endmodule";
        let p = parse_default(src).unwrap();
        let g = build_ig(&p, &lra(&p));
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn disjoint_live_ranges_do_not_interfere() {
        // u is read at location 1 only; v is written at location 1 and read
        // at location 2; u is never live past location 1.
        let src = "dtmc module m cf : [0..2] init 0; u : [0..1] init 0; v : [0..1] init 0;\n\
                   [] cf=0 -> 1:(cf'=1)&(u'=1);\n\
                   [] cf=1 & u=1 -> 1:(cf'=2)&(v'=1);\n\
                   [] cf=2 & v=1 -> 1:(cf'=0)&(v'=0); endmodule";
        let p = parse_default(src).unwrap();
        let live = lra(&p);
        assert_eq!(live.at(1).iter().collect::<Vec<_>>(), vec!["u"]);
        assert_eq!(live.at(2).iter().collect::<Vec<_>>(), vec!["v"]);
        let g = build_ig(&p, &live);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn dot_output() {
        let mut g = Graph::new(["a", "b"]);
        g.add_edge(0, 1);
        assert_eq!(
            g.to_dot(),
            "graph interference {\n  \"a\";\n  \"b\";\n  \"a\" -- \"b\";\n}\n"
        );
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..30).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..(n * 3)).prop_map(move |edges| {
                let mut g = Graph::new((0..n).map(|i| format!("v{i}")));
                for (a, b) in edges {
                    g.add_edge(a, b);
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn coloring_is_proper_and_bounded(g in arb_graph()) {
            let c = welsh_powell(&g);
            prop_assert!(c.is_proper(&g));
            prop_assert!(c.color_count() <= g.max_degree() + 1);
            prop_assert!(c.colors().iter().all(|&k| k >= 1 && k <= c.color_count()));
            prop_assert_eq!(welsh_powell(&g), c);
        }
    }
}
