//! Connected components, greedy modularity clustering, cluster labels and
//! identity propagation across ticks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::semantics::{SimilarityGraph, TermVector};

/// Number of terms in a cluster label.
pub const LABEL_TERMS: usize = 5;

/// A set of node ids with a stable identifier. Used for both components
/// and clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub id: String,
    /// Sorted, unique.
    pub members: Vec<String>,
}

impl Group {
    fn provisional(mut members: Vec<String>) -> Self {
        members.sort();
        Group {
            id: members[0].clone(),
            members,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.members.binary_search_by(|m| m.as_str().cmp(id)).is_ok()
    }
}

pub type Component = Group;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub group: Group,
    pub label: Vec<String>,
}

/// Connected components ordered by smallest member id. Each component's
/// provisional id is its smallest member; see [`assign_stable_ids`].
pub fn connected_components(g: &SimilarityGraph) -> Vec<Component> {
    let n = g.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in g.edges() {
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if ra != rb {
            // keep the smaller index as root so roots are smallest members
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(g.nodes()[i].clone());
    }
    groups.into_values().map(Group::provisional).collect()
}

/// Modularity `Q = Σ_c [ in_c / 2m − (tot_c / 2m)² ]` of a partition given as
/// a community index per node. Zero for edgeless graphs.
pub fn modularity(g: &SimilarityGraph, community: &[usize]) -> f64 {
    let m: f64 = g.edges().iter().map(|e| e.weight).sum();
    if m == 0.0 {
        return 0.0;
    }
    let mut inside: HashMap<usize, f64> = HashMap::new();
    let mut total: HashMap<usize, f64> = HashMap::new();
    for e in g.edges() {
        if community[e.a] == community[e.b] {
            *inside.entry(community[e.a]).or_default() += 2.0 * e.weight;
        }
        *total.entry(community[e.a]).or_default() += e.weight;
        *total.entry(community[e.b]).or_default() += e.weight;
    }
    let two_m = 2.0 * m;
    let mut keys: Vec<usize> = total.keys().copied().collect();
    keys.sort_unstable();
    keys.iter()
        .map(|c| inside.get(c).copied().unwrap_or(0.0) / two_m - (total[c] / two_m).powi(2))
        .sum()
}

/// Greedy agglomerative modularity clustering (Clauset–Newman–Moore) of a
/// connected subgraph.
///
/// Starts from singletons and repeatedly merges the adjacent pair with the
/// largest gain `ΔQ = e_ab / m − tot_a·tot_b / (2m²)`, stopping once the
/// best gain is not positive. A cluster is named by its smallest member;
/// equal gains prefer the smaller cluster name, then the smaller partner.
pub fn cluster_component(g: &SimilarityGraph) -> Vec<Cluster> {
    let n = g.len();
    let m: f64 = g.edges().iter().map(|e| e.weight).sum();
    // cluster key = node index of smallest member (nodes are sorted by id)
    let mut members: BTreeMap<usize, Vec<usize>> = (0..n).map(|i| (i, vec![i])).collect();
    if m > 0.0 {
        let mut between: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
        let mut tot = vec![0.0; n];
        for e in g.edges() {
            *between.entry(e.a).or_default().entry(e.b).or_default() += e.weight;
            *between.entry(e.b).or_default().entry(e.a).or_default() += e.weight;
            tot[e.a] += e.weight;
            tot[e.b] += e.weight;
        }
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for (&a, nbrs) in &between {
                for (&b, &w) in nbrs.range(a + 1..) {
                    let gain = w / m - tot[a] * tot[b] / (2.0 * m * m);
                    // iteration is (a, b) ascending, so strict > keeps the tie rule
                    if best.is_none_or(|(g0, _, _)| gain > g0) {
                        best = Some((gain, a, b));
                    }
                }
            }
            let Some((gain, a, b)) = best else { break };
            if gain <= 0.0 {
                break;
            }
            // merge b into a (a < b, so a stays the smallest member)
            let moved = members.remove(&b).unwrap_or_default();
            members.get_mut(&a).expect("live cluster").extend(moved);
            tot[a] += tot[b];
            tot[b] = 0.0;
            let b_nbrs = between.remove(&b).unwrap_or_default();
            for (c, w) in b_nbrs {
                if let Some(list) = between.get_mut(&c) {
                    list.remove(&b);
                }
                if c == a {
                    continue;
                }
                *between.entry(a).or_default().entry(c).or_default() += w;
                *between.entry(c).or_default().entry(a).or_default() += w;
            }
        }
    }
    members
        .into_values()
        .map(|idx| Cluster {
            group: Group::provisional(idx.into_iter().map(|i| g.nodes()[i].clone()).collect()),
            label: Vec::new(),
        })
        .collect()
}

/// Top terms by summed TF-IDF weight over the members; ties by term.
pub fn label_cluster(members: &[String], vectors: &BTreeMap<String, TermVector>) -> Vec<String> {
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for id in members {
        if let Some(v) = vectors.get(id) {
            for (t, w) in v.weights() {
                *sums.entry(t.as_str()).or_default() += w;
            }
        }
    }
    let mut ranked: Vec<(&str, f64)> = sums.into_iter().collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(y.0)));
    ranked
        .into_iter()
        .take(LABEL_TERMS)
        .map(|(t, _)| t.to_string())
        .collect()
}

/// Issues fresh ids `"{prefix}{n}"` with a monotone counter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdAllocator {
    prefix: String,
    next: u64,
}

impl IdAllocator {
    pub fn new(prefix: impl Into<String>) -> Self {
        IdAllocator {
            prefix: prefix.into(),
            next: 1,
        }
    }

    pub fn fresh(&mut self) -> String {
        let id = format!("{}{}", self.prefix, self.next);
        self.next += 1;
        id
    }
}

/// Carries ids from the previous partition to the current one.
///
/// Candidate pairs `(current, previous)` with positive overlap are taken
/// greedily by overlap descending, then previous id ascending, then current
/// position; each side is used at most once. Current groups left unmatched
/// get ids from `alloc`. Returns one id per current group, in order.
pub fn assign_stable_ids(
    current: &[Vec<String>],
    previous: &[Group],
    alloc: &mut IdAllocator,
) -> Vec<String> {
    let mut owner: HashMap<&str, usize> = HashMap::new();
    for (pi, p) in previous.iter().enumerate() {
        for m in &p.members {
            owner.insert(m.as_str(), pi);
        }
    }
    let mut pairs: Vec<(usize, &str, usize, usize)> = Vec::new();
    for (ci, members) in current.iter().enumerate() {
        let mut overlap: BTreeMap<usize, usize> = BTreeMap::new();
        for m in members {
            if let Some(&pi) = owner.get(m.as_str()) {
                *overlap.entry(pi).or_default() += 1;
            }
        }
        for (pi, count) in overlap {
            pairs.push((count, previous[pi].id.as_str(), ci, pi));
        }
    }
    pairs.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(y.1)).then(x.2.cmp(&y.2)));

    let mut ids: Vec<Option<String>> = vec![None; current.len()];
    let mut used = BTreeSet::new();
    for (_, pid, ci, pi) in pairs {
        if ids[ci].is_none() && !used.contains(&pi) {
            used.insert(pi);
            ids[ci] = Some(pid.to_string());
        }
    }
    ids.into_iter()
        .map(|id| id.unwrap_or_else(|| alloc.fresh()))
        .collect()
}
