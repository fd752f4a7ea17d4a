//! Dynamic forests over fixed vertex sets: link-cut trees with a neighbor-set
//! augmentation and integer vertex masses.
//!
//! The splay-tree core gives amortized O(log n) `link`, `cut`, `find_root`,
//! `reroot`, and path extraction. Each vertex additionally keeps its current
//! tree neighbors, which makes subtree walks over a represented tree possible
//! without touching the splay structure; `path_decomposition` uses that to
//! accumulate the mass hanging off a tree path in one pass over the tree.

use thiserror::Error;

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct SplayNode {
    /// Splay parent while this node is a splay child, otherwise the
    /// path-parent into the next preferred path (or NIL at the top).
    p: u32,
    c: [u32; 2],
    flip: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ForestError {
    #[error("vertices {u} and {v} are in different trees")]
    DifferentTrees { u: usize, v: usize },
}

/// Ordered tree path with per-vertex hanging masses: entry `i` is the mass of
/// path vertex `i` plus every subtree attached to it off the path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathMassProfile {
    pub entries: Vec<(usize, u64)>,
}

impl PathMassProfile {
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, m)| m).sum()
    }
}

/// Full decomposition of a tree around one of its paths. `members` lists every
/// vertex of the tree, path vertices first; `anchor[i]` is the path position
/// that `members[i]` hangs from (its own position for path vertices).
#[derive(Debug, Clone)]
pub struct PathDecomposition {
    pub path: Vec<usize>,
    pub hanging_mass: Vec<u64>,
    pub members: Vec<usize>,
    pub anchor: Vec<u32>,
}

/// A forest on vertices `0..len`, initially all singletons.
///
/// `link` and `cut` assert their structural contracts (distinct trees for
/// `link`, an existing tree edge for `cut`); cross-tree path queries return
/// `ForestError` instead since they depend on runtime state the caller may
/// not control.
#[derive(Debug)]
pub struct DynamicForest {
    n: Vec<SplayNode>,
    adj: Vec<Vec<u32>>,
    mass: Vec<u64>,
    mark: Vec<u32>,
    slot: Vec<u32>,
    epoch: u32,
    spine: Vec<u32>,
}

impl DynamicForest {
    pub fn new(masses: &[u64]) -> Self {
        let len = masses.len();
        DynamicForest {
            n: vec![SplayNode { p: NIL, c: [NIL, NIL], flip: false }; len],
            adj: vec![Vec::new(); len],
            mass: masses.to_vec(),
            mark: vec![0; len],
            slot: vec![0; len],
            epoch: 0,
            spine: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    pub fn mass(&self, v: usize) -> u64 {
        self.mass[v]
    }

    /// Current tree neighbors of `v`, in the order the edges were linked.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn is_tree_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].contains(&(v as u32))
    }

    // ---- splay internals ----

    fn side_of(&self, u: u32) -> Option<usize> {
        let p = self.n[u as usize].p;
        if p == NIL {
            return None;
        }
        let c = self.n[p as usize].c;
        if c[0] == u {
            Some(0)
        } else if c[1] == u {
            Some(1)
        } else {
            None
        }
    }

    fn push(&mut self, u: u32) {
        if self.n[u as usize].flip {
            self.n[u as usize].flip = false;
            self.n[u as usize].c.swap(0, 1);
            for ch in self.n[u as usize].c {
                if ch != NIL {
                    self.n[ch as usize].flip ^= true;
                }
            }
        }
    }

    fn rotate(&mut self, u: u32) {
        let p = self.n[u as usize].p;
        let g = self.n[p as usize].p;
        let side = self.side_of(u).expect("rotate requires a splay child");
        let gside = self.side_of(p);
        let b = self.n[u as usize].c[1 - side];
        self.n[p as usize].c[side] = b;
        if b != NIL {
            self.n[b as usize].p = p;
        }
        self.n[u as usize].c[1 - side] = p;
        self.n[p as usize].p = u;
        self.n[u as usize].p = g;
        if let Some(gs) = gside {
            self.n[g as usize].c[gs] = u;
        }
    }

    fn splay(&mut self, u: u32) {
        let mut spine = std::mem::take(&mut self.spine);
        spine.clear();
        let mut x = u;
        spine.push(x);
        while self.side_of(x).is_some() {
            x = self.n[x as usize].p;
            spine.push(x);
        }
        for &y in spine.iter().rev() {
            self.push(y);
        }
        self.spine = spine;
        while let Some(side_u) = self.side_of(u) {
            let p = self.n[u as usize].p;
            match self.side_of(p) {
                None => self.rotate(u),
                Some(side_p) if side_p == side_u => {
                    self.rotate(p);
                    self.rotate(u);
                }
                Some(_) => {
                    self.rotate(u);
                    self.rotate(u);
                }
            }
        }
    }

    /// Makes the path from the represented root to `u` preferred and splays
    /// `u` to the top of its auxiliary tree.
    fn access(&mut self, u: u32) {
        self.splay(u);
        // The detached right subtree keeps its parent pointer as a path-parent.
        self.n[u as usize].c[1] = NIL;
        while self.n[u as usize].p != NIL {
            let w = self.n[u as usize].p;
            self.splay(w);
            self.n[w as usize].c[1] = u;
            self.splay(u);
        }
    }

    // ---- public tree operations ----

    /// Makes `u` the root of its represented tree.
    pub fn reroot(&mut self, u: usize) {
        let u = u as u32;
        self.access(u);
        self.n[u as usize].flip ^= true;
    }

    pub fn find_root(&mut self, u: usize) -> usize {
        let mut x = u as u32;
        self.access(x);
        loop {
            self.push(x);
            let l = self.n[x as usize].c[0];
            if l == NIL {
                break;
            }
            x = l;
        }
        self.splay(x);
        x as usize
    }

    pub fn connected(&mut self, u: usize, v: usize) -> bool {
        u == v || self.find_root(u) == self.find_root(v)
    }

    /// Adds the tree edge `(u, v)`. The endpoints must be in different trees.
    pub fn link(&mut self, u: usize, v: usize) {
        assert!(!self.connected(u, v), "link({u}, {v}): endpoints already share a tree");
        self.reroot(u);
        self.n[u].p = v as u32;
        self.adj[u].push(v as u32);
        self.adj[v].push(u as u32);
    }

    /// Removes the tree edge `(u, v)`, which must currently exist.
    pub fn cut(&mut self, u: usize, v: usize) {
        let pos_u = self.adj[u]
            .iter()
            .position(|&w| w == v as u32)
            .unwrap_or_else(|| panic!("cut({u}, {v}): not a tree edge"));
        self.adj[u].swap_remove(pos_u);
        let pos_v = self.adj[v]
            .iter()
            .position(|&w| w == u as u32)
            .expect("neighbor sets out of sync");
        self.adj[v].swap_remove(pos_v);

        self.reroot(u);
        self.access(v as u32);
        self.push(v as u32);
        let left = self.n[v].c[0];
        debug_assert_eq!(left, u as u32, "edge ({u}, {v}) missing from the splay path");
        self.n[v].c[0] = NIL;
        self.n[left as usize].p = NIL;
    }

    /// Vertices of the tree path from `u` to `v`, inclusive, in path order.
    pub fn tree_path(&mut self, u: usize, v: usize) -> Result<Vec<usize>, ForestError> {
        if u == v {
            return Ok(vec![u]);
        }
        if !self.connected(u, v) {
            return Err(ForestError::DifferentTrees { u, v });
        }
        self.reroot(u);
        self.access(v as u32);
        let mut out = Vec::new();
        let mut stack: Vec<u32> = Vec::new();
        let mut x = v as u32;
        loop {
            while x != NIL {
                self.push(x);
                stack.push(x);
                x = self.n[x as usize].c[0];
            }
            match stack.pop() {
                None => break,
                Some(y) => {
                    out.push(y as usize);
                    x = self.n[y as usize].c[1];
                }
            }
        }
        debug_assert_eq!(out.first(), Some(&u));
        debug_assert_eq!(out.last(), Some(&v));
        Ok(out)
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        self.epoch
    }

    /// Decomposes the tree containing `u` and `v` around the path between
    /// them: the path itself, the mass hanging off each path vertex, and the
    /// membership of every tree vertex to its path anchor. One pass over the
    /// tree via the neighbor sets.
    pub fn path_decomposition(&mut self, u: usize, v: usize) -> Result<PathDecomposition, ForestError> {
        let path = self.tree_path(u, v)?;
        let epoch = self.next_epoch();
        for (i, &p) in path.iter().enumerate() {
            self.mark[p] = epoch;
            self.slot[p] = i as u32;
        }
        let mut hanging_mass: Vec<u64> = path.iter().map(|&p| self.mass[p]).collect();
        let mut members = path.clone();
        let mut anchor: Vec<u32> = (0..path.len() as u32).collect();
        let mut stack: Vec<u32> = Vec::new();
        for i in 0..path.len() {
            stack.extend(self.adj[path[i]].iter().filter(|&&w| self.mark[w as usize] != epoch));
            for &w in &stack {
                self.mark[w as usize] = epoch;
                self.slot[w as usize] = i as u32;
            }
            while let Some(w) = stack.pop() {
                hanging_mass[i] += self.mass[w as usize];
                members.push(w as usize);
                anchor.push(i as u32);
                for &x in &self.adj[w as usize] {
                    if self.mark[x as usize] != epoch {
                        self.mark[x as usize] = epoch;
                        self.slot[x as usize] = i as u32;
                        stack.push(x);
                    }
                }
            }
        }
        Ok(PathDecomposition { path, hanging_mass, members, anchor })
    }

    /// The `(vertex, hanging mass)` sequence along the path from `u` to `v`.
    pub fn path_mass_profile(&mut self, u: usize, v: usize) -> Result<PathMassProfile, ForestError> {
        let d = self.path_decomposition(u, v)?;
        Ok(PathMassProfile {
            entries: d.path.into_iter().zip(d.hanging_mass).collect(),
        })
    }

    /// Every vertex of the tree containing `v`, in DFS order from `v`.
    pub fn component_vertices(&self, v: usize) -> Vec<usize> {
        let mut seen = vec![v];
        let mut stack = vec![v as u32];
        let mut on_stack = std::collections::HashSet::new();
        on_stack.insert(v as u32);
        while let Some(w) = stack.pop() {
            for &x in &self.adj[w as usize] {
                if on_stack.insert(x) {
                    seen.push(x as usize);
                    stack.push(x);
                }
            }
        }
        seen
    }

    pub fn component_mass(&self, v: usize) -> u64 {
        self.component_vertices(v).iter().map(|&w| self.mass[w]).sum()
    }

    /// Tree edges of the component containing `v`, as `(min, max)` pairs
    /// sorted ascending.
    pub fn component_edges(&self, v: usize) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .component_vertices(v)
            .into_iter()
            .flat_map(|w| {
                self.adj[w]
                    .iter()
                    .filter(move |&&x| (x as usize) > w)
                    .map(move |&x| (w, x as usize))
                    .collect::<Vec<_>>()
            })
            .collect();
        edges.sort_unstable();
        edges
    }
}
