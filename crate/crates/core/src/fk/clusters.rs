use crate::error::Result;
use crate::lattice::{FkConfig, GhostGraph};

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i as u32;
        }
        self.size.fill(1);
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    #[inline]
    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Returns the new root.
    #[inline]
    pub fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        big
    }

    pub fn same(&mut self, a: u32, b: u32) -> bool {
        self.find(a) == self.find(b)
    }

    pub fn set_size(&mut self, x: u32) -> u32 {
        let r = self.find(x);
        self.size[r as usize]
    }
}

/// Partition of the sites into FK-open clusters.
///
/// Cluster ids are dense (`0..num_clusters`) and ordered by the smallest
/// site index each cluster contains, so cluster `k`'s representative is
/// `representatives()[k]` and labels are canonical. Ghost edges never merge
/// clusters; they only set the cluster's ghost flag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterDecomposition {
    label: Vec<u32>,
    size: Vec<u32>,
    ghost: Vec<bool>,
    representative: Vec<u32>,
}

impl ClusterDecomposition {
    pub fn num_clusters(&self) -> usize {
        self.size.len()
    }

    /// Cluster id of every site.
    pub fn labels(&self) -> &[u32] {
        &self.label
    }

    pub fn label(&self, site: usize) -> usize {
        self.label[site] as usize
    }

    pub fn sizes(&self) -> &[u32] {
        &self.size
    }

    pub fn ghost_flags(&self) -> &[bool] {
        &self.ghost
    }

    /// Smallest site index in each cluster.
    pub fn representatives(&self) -> &[u32] {
        &self.representative
    }

    pub fn is_ghost_connected(&self, site: usize) -> bool {
        self.ghost[self.label[site] as usize]
    }

    /// Clusters that are attached to the ghost. There can be several: they
    /// all belong to the single cluster of the extended graph that contains g.
    pub fn ghost_clusters(&self) -> impl Iterator<Item = usize> + '_ {
        self.ghost.iter().enumerate().filter(|(_, &g)| g).map(|(i, _)| i)
    }

    /// Smallest id among the ghost-attached clusters, if any.
    pub fn ghost_cluster_id(&self) -> Option<usize> {
        self.ghost.iter().position(|&g| g)
    }

    /// Number of clusters of the extended graph that do not contain the ghost.
    pub fn non_ghost_count(&self) -> usize {
        self.ghost.iter().filter(|&&g| !g).count()
    }

    /// Whether `x` and `y` are joined in the extended graph, i.e. either in
    /// the same cluster or both attached to the ghost.
    pub fn connected(&self, x: usize, y: usize) -> bool {
        self.label[x] == self.label[y] || (self.is_ghost_connected(x) && self.is_ghost_connected(y))
    }

    pub(crate) fn from_union_find(uf: &mut UnionFind, n: usize, ghost_sites: impl Iterator<Item = usize>) -> Self {
        let mut root_label = vec![u32::MAX; n];
        let mut label = vec![0u32; n];
        let mut size = Vec::new();
        let mut representative = Vec::new();
        for site in 0..n {
            let r = uf.find(site as u32) as usize;
            if root_label[r] == u32::MAX {
                root_label[r] = size.len() as u32;
                size.push(0);
                representative.push(site as u32);
            }
            let l = root_label[r];
            label[site] = l;
            size[l as usize] += 1;
        }
        let mut ghost = vec![false; size.len()];
        for s in ghost_sites {
            ghost[label[s] as usize] = true;
        }
        ClusterDecomposition {
            label,
            size,
            ghost,
            representative,
        }
    }
}

/// Canonical cluster decomposition of `fk` on `graph`.
///
/// Under a wired-FK boundary the boundary sites are joined through the
/// outside and form one cluster together.
pub fn find_clusters(graph: &GhostGraph, fk: &FkConfig) -> Result<ClusterDecomposition> {
    fk.check(graph)?;
    let mut uf = UnionFind::new(graph.num_sites());
    Ok(find_clusters_with(graph, fk, &mut uf))
}

pub(crate) fn find_clusters_with(graph: &GhostGraph, fk: &FkConfig, uf: &mut UnionFind) -> ClusterDecomposition {
    uf.reset();
    union_internal(graph, &fk.internal, uf);
    ClusterDecomposition::from_union_find(
        uf,
        graph.num_sites(),
        fk.external.iter().enumerate().filter(|(_, &o)| o).map(|(s, _)| s),
    )
}

pub(crate) fn union_internal(graph: &GhostGraph, internal: &[bool], uf: &mut UnionFind) {
    for (&[u, v], &open) in graph.internal_edges().iter().zip(internal) {
        if open {
            uf.union(u, v);
        }
    }
    let wired = graph.wired_sites();
    if let Some((&first, rest)) = wired.split_first() {
        for &s in rest {
            uf.union(first, s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_graph, Boundary, LatticeSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(w: usize, h: usize, b: Boundary) -> GhostGraph {
        build_graph(LatticeSpec::new(w, h, b).unwrap()).unwrap()
    }

    /// Depth-first labeling straight from the edge list.
    fn dfs_labels(g: &GhostGraph, fk: &FkConfig) -> Vec<usize> {
        let n = g.num_sites();
        let mut adj = vec![Vec::new(); n];
        for (e, &[u, v]) in g.internal_edges().iter().enumerate() {
            if fk.internal[e] {
                adj[u as usize].push(v as usize);
                adj[v as usize].push(u as usize);
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = next;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    #[test]
    fn all_closed_gives_singletons() {
        let g = graph(3, 4, Boundary::Free);
        let d = find_clusters(&g, &FkConfig::closed(&g)).unwrap();
        assert_eq!(d.num_clusters(), 12);
        assert!(d.sizes().iter().all(|&s| s == 1));
        assert_eq!(d.labels(), (0..12).collect::<Vec<u32>>().as_slice());
    }

    #[test]
    fn all_open_gives_one_cluster() {
        let g = graph(4, 3, Boundary::Periodic);
        let d = find_clusters(&g, &FkConfig::open(&g)).unwrap();
        assert_eq!(d.num_clusters(), 1);
        assert_eq!(d.sizes(), &[12]);
        assert!(d.ghost_flags()[0]);
    }

    #[test]
    fn wired_boundary_joins_rim() {
        let g = graph(3, 3, Boundary::WiredFk);
        let d = find_clusters(&g, &FkConfig::closed(&g)).unwrap();
        // rim of 8 plus the center
        assert_eq!(d.num_clusters(), 2);
        assert_eq!(d.sizes(), &[8, 1]);
        assert_eq!(d.label(4), 1);
    }

    #[test]
    fn matches_dfs_on_random_configs() {
        let g = graph(4, 4, Boundary::Free);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut fk = FkConfig::closed(&g);
            fk.internal.iter_mut().for_each(|b| *b = rng.gen_bool(0.5));
            fk.external.iter_mut().for_each(|b| *b = rng.gen_bool(0.2));
            let d = find_clusters(&g, &fk).unwrap();
            let reference = dfs_labels(&g, &fk);
            // both label in order of first appearance, so they must agree exactly
            assert_eq!(d.labels().iter().map(|&l| l as usize).collect::<Vec<_>>(), reference);
            let total: u32 = d.sizes().iter().sum();
            assert_eq!(total, 16);
            for s in 0..16 {
                if fk.external[s] {
                    assert!(d.is_ghost_connected(s));
                }
            }
        }
    }

    #[test]
    fn size_mismatch_is_reported() {
        let g = graph(2, 2, Boundary::Free);
        let mut fk = FkConfig::closed(&g);
        fk.internal.pop();
        assert!(find_clusters(&g, &fk).is_err());
    }
}
