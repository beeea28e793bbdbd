//! Rooted trees with the ancestor partial order.
//!
//! Three representations share one interface. Explicit trees hold an arena of
//! parent/children records and allow arbitrary offspring counts. Chains and
//! full binary trees are implicit: every query is answered arithmetically
//! from a node code, so a depth-22 binary tree (2^23 - 1 nodes) is traversed
//! without materializing a single node record. Node identity:
//!
//! * explicit: arena index (construction order),
//! * chain: the level `0..=depth`,
//! * binary: 1-based heap code (root 1, children of `v` are `2v` and
//!   `2v + 1`), so the code's bits below the leading one spell the
//!   root-to-node path.
//!
//! A [`NodeRef`] is only meaningful for the tree that produced it; accessors
//! panic when handed a reference that is out of range for the tree.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::{Error, Result};

/// Hard cap on explicitly materialized node records.
pub const EXPLICIT_NODE_CAP: u64 = 1 << 22;

/// Maximum depth of an implicit full binary tree (codes must fit in u64).
pub const BINARY_DEPTH_CAP: u32 = 60;

/// Opaque node handle; valid only within its owning [`Tree`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct NodeRef(u64);

/// Shape tag of a tree.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TreeKind {
    Explicit,
    Chain { depth: u32 },
    Binary { depth: u32 },
}

#[derive(Clone, Debug)]
struct Arena {
    parent: Vec<Option<u32>>,
    children: Vec<Vec<u32>>,
    depth: Vec<u32>,
    /// External ids as given in the source document (construction order).
    external_id: Vec<u64>,
    height: u32,
    root: u32,
}

#[derive(Clone, Debug)]
enum Repr {
    Explicit(Arena),
    Chain { depth: u32 },
    Binary { depth: u32 },
}

/// A rooted tree.
#[derive(Clone, Debug)]
pub struct Tree {
    repr: Repr,
}

/// One node record of the JSON tree document.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: u64,
    pub parent: Option<u64>,
}

#[derive(Deserialize)]
struct TreeDoc {
    nodes: Vec<NodeDoc>,
}

/// Declarative tree description used in experiment configs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TreeSpec {
    Chain { depth: u32 },
    Binary { depth: u32 },
    /// Root plus `leaves` children; handy for independent-maxima checks.
    Star { leaves: u32 },
    Explicit { nodes: Vec<NodeDoc> },
}

impl TreeSpec {
    pub fn build(&self) -> Result<Tree> {
        match self {
            TreeSpec::Chain { depth } => Ok(Tree::chain(*depth)),
            TreeSpec::Binary { depth } => Tree::binary(*depth),
            TreeSpec::Star { leaves } => Tree::star(*leaves),
            TreeSpec::Explicit { nodes } => Tree::from_node_docs(nodes),
        }
    }
}

impl Tree {
    /// Chain of `depth + 1` nodes `0 - 1 - ... - depth`. Implicit; any depth.
    pub fn chain(depth: u32) -> Tree {
        Tree {
            repr: Repr::Chain { depth },
        }
    }

    /// Full binary tree of the given depth, `2^(depth+1) - 1` nodes.
    /// Implicit: no records are materialized at any depth up to the code cap.
    pub fn binary(depth: u32) -> Result<Tree> {
        if depth > BINARY_DEPTH_CAP {
            return Err(Error::InvalidTree(format!(
                "binary depth {depth} exceeds code cap {BINARY_DEPTH_CAP}"
            )));
        }
        Ok(Tree {
            repr: Repr::Binary { depth },
        })
    }

    /// Root with `leaves` children, as an explicit tree.
    pub fn star(leaves: u32) -> Result<Tree> {
        let mut nodes = Vec::with_capacity(leaves as usize + 1);
        nodes.push(NodeDoc {
            id: 0,
            parent: None,
        });
        for i in 0..leaves {
            nodes.push(NodeDoc {
                id: i as u64 + 1,
                parent: Some(0),
            });
        }
        Tree::from_node_docs(&nodes)
    }

    /// Explicit tree from `(id, parent)` records (ids arbitrary distinct
    /// non-negative integers, exactly one root with `parent: null`).
    pub fn from_node_docs(docs: &[NodeDoc]) -> Result<Tree> {
        if docs.is_empty() {
            return Err(Error::InvalidTree("empty node list".into()));
        }
        if docs.len() as u64 > EXPLICIT_NODE_CAP {
            return Err(Error::MaterializeCap {
                nodes: docs.len() as u64,
                cap: EXPLICIT_NODE_CAP,
            });
        }
        let mut index_of = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if index_of.insert(d.id, i as u32).is_some() {
                return Err(Error::InvalidTree(format!("duplicate node id {}", d.id)));
            }
        }
        let mut parent = vec![None; docs.len()];
        let mut children: Vec<Vec<u32>> = vec![Vec::new(); docs.len()];
        let mut root = None;
        for (i, d) in docs.iter().enumerate() {
            match d.parent {
                None => {
                    if let Some(r) = root {
                        return Err(Error::InvalidTree(format!(
                            "multiple roots: ids {} and {}",
                            docs[r as usize].id, d.id
                        )));
                    }
                    root = Some(i as u32);
                }
                Some(p) => {
                    let pi = *index_of.get(&p).ok_or_else(|| {
                        Error::InvalidTree(format!("node {} has unknown parent {}", d.id, p))
                    })?;
                    if pi == i as u32 {
                        return Err(Error::InvalidTree(format!("node {} is its own parent", d.id)));
                    }
                    parent[i] = Some(pi);
                    children[pi as usize].push(i as u32);
                }
            }
        }
        let root = root.ok_or_else(|| Error::InvalidTree("no root (parent: null) node".into()))?;
        // BFS from the root assigns depths and detects nodes that hang off a
        // cycle (they are never reached).
        let mut depth = vec![u32::MAX; docs.len()];
        let mut queue = std::collections::VecDeque::new();
        depth[root as usize] = 0;
        queue.push_back(root);
        let mut seen = 1usize;
        let mut height = 0;
        while let Some(v) = queue.pop_front() {
            for &c in &children[v as usize] {
                depth[c as usize] = depth[v as usize] + 1;
                height = height.max(depth[c as usize]);
                seen += 1;
                queue.push_back(c);
            }
        }
        if seen != docs.len() {
            return Err(Error::InvalidTree(format!(
                "{} nodes unreachable from the root (cycle in parent links)",
                docs.len() - seen
            )));
        }
        Ok(Tree {
            repr: Repr::Explicit(Arena {
                parent,
                children,
                depth,
                external_id: docs.iter().map(|d| d.id).collect(),
                height,
                root,
            }),
        })
    }

    /// Parse the tree document `{"nodes":[{"id":0,"parent":null},...]}`.
    pub fn from_json_str(s: &str) -> Result<Tree> {
        let doc: TreeDoc = serde_json::from_str(s)?;
        Tree::from_node_docs(&doc.nodes)
    }

    /// Materialize an implicit tree as an explicit arena (subject to the
    /// node cap). Explicit trees are cloned unchanged. External ids follow
    /// the dense index order of the source.
    pub fn to_explicit(&self) -> Result<Tree> {
        match &self.repr {
            Repr::Explicit(_) => Ok(self.clone()),
            _ => {
                let n = self.node_count();
                if n > EXPLICIT_NODE_CAP {
                    return Err(Error::MaterializeCap {
                        nodes: n,
                        cap: EXPLICIT_NODE_CAP,
                    });
                }
                let mut docs = Vec::with_capacity(n as usize);
                for i in 0..n {
                    let node = self.node_at(i);
                    docs.push(NodeDoc {
                        id: i,
                        parent: self.parent(node).map(|p| self.dense_index(p)),
                    });
                }
                Tree::from_node_docs(&docs)
            }
        }
    }

    pub fn kind(&self) -> TreeKind {
        match &self.repr {
            Repr::Explicit(_) => TreeKind::Explicit,
            Repr::Chain { depth } => TreeKind::Chain { depth: *depth },
            Repr::Binary { depth } => TreeKind::Binary { depth: *depth },
        }
    }

    pub fn is_chain(&self) -> bool {
        matches!(self.repr, Repr::Chain { .. })
    }

    pub fn root(&self) -> NodeRef {
        match &self.repr {
            Repr::Explicit(a) => NodeRef(a.root as u64),
            Repr::Chain { .. } => NodeRef(0),
            Repr::Binary { .. } => NodeRef(1),
        }
    }

    pub fn node_count(&self) -> u64 {
        match &self.repr {
            Repr::Explicit(a) => a.parent.len() as u64,
            Repr::Chain { depth } => *depth as u64 + 1,
            Repr::Binary { depth } => (1u64 << (*depth + 1)) - 1,
        }
    }

    /// Largest node depth (the chain/binary depth parameter).
    pub fn height(&self) -> u32 {
        match &self.repr {
            Repr::Explicit(a) => a.height,
            Repr::Chain { depth } | Repr::Binary { depth } => *depth,
        }
    }

    #[inline]
    fn check(&self, t: NodeRef) -> u64 {
        let ok = match &self.repr {
            Repr::Explicit(a) => (t.0 as usize) < a.parent.len(),
            Repr::Chain { depth } => t.0 <= *depth as u64,
            Repr::Binary { depth } => t.0 >= 1 && t.0 < (1u64 << (*depth + 1)),
        };
        assert!(ok, "node reference {} out of range for this tree", t.0);
        t.0
    }

    pub fn depth(&self, t: NodeRef) -> u32 {
        let v = self.check(t);
        match &self.repr {
            Repr::Explicit(a) => a.depth[v as usize],
            Repr::Chain { .. } => v as u32,
            Repr::Binary { .. } => 63 - v.leading_zeros(),
        }
    }

    pub fn parent(&self, t: NodeRef) -> Option<NodeRef> {
        let v = self.check(t);
        match &self.repr {
            Repr::Explicit(a) => a.parent[v as usize].map(|p| NodeRef(p as u64)),
            Repr::Chain { .. } => v.checked_sub(1).map(NodeRef),
            Repr::Binary { .. } => {
                if v == 1 {
                    None
                } else {
                    Some(NodeRef(v >> 1))
                }
            }
        }
    }

    pub fn children(&self, t: NodeRef) -> Vec<NodeRef> {
        let v = self.check(t);
        match &self.repr {
            Repr::Explicit(a) => a.children[v as usize]
                .iter()
                .map(|&c| NodeRef(c as u64))
                .collect(),
            Repr::Chain { depth } => {
                if (v as u32) < *depth {
                    vec![NodeRef(v + 1)]
                } else {
                    vec![]
                }
            }
            Repr::Binary { depth } => {
                if self.depth(t) < *depth {
                    vec![NodeRef(2 * v), NodeRef(2 * v + 1)]
                } else {
                    vec![]
                }
            }
        }
    }

    /// `t` precedes-or-equals `s` in the ancestor order (reflexive).
    pub fn is_ancestor(&self, t: NodeRef, s: NodeRef) -> bool {
        let (a, b) = (self.check(t), self.check(s));
        match &self.repr {
            Repr::Explicit(ar) => {
                let (da, db) = (ar.depth[a as usize], ar.depth[b as usize]);
                if da > db {
                    return false;
                }
                let mut v = b as u32;
                for _ in 0..(db - da) {
                    v = ar.parent[v as usize].unwrap();
                }
                v as u64 == a
            }
            Repr::Chain { .. } => a <= b,
            Repr::Binary { .. } => {
                let (da, db) = (63 - a.leading_zeros(), 63 - b.leading_zeros());
                da <= db && (b >> (db - da)) == a
            }
        }
    }

    pub fn is_comparable(&self, t: NodeRef, s: NodeRef) -> bool {
        self.is_ancestor(t, s) || self.is_ancestor(s, t)
    }

    /// Deepest common ancestor.
    pub fn meet(&self, t: NodeRef, s: NodeRef) -> NodeRef {
        let (a, b) = (self.check(t), self.check(s));
        match &self.repr {
            Repr::Explicit(ar) => {
                let (mut x, mut y) = (a as u32, b as u32);
                let (mut dx, mut dy) = (ar.depth[x as usize], ar.depth[y as usize]);
                while dx > dy {
                    x = ar.parent[x as usize].unwrap();
                    dx -= 1;
                }
                while dy > dx {
                    y = ar.parent[y as usize].unwrap();
                    dy -= 1;
                }
                while x != y {
                    x = ar.parent[x as usize].unwrap();
                    y = ar.parent[y as usize].unwrap();
                }
                NodeRef(x as u64)
            }
            Repr::Chain { .. } => NodeRef(a.min(b)),
            Repr::Binary { .. } => {
                let (mut x, mut y) = (a, b);
                let (dx, dy) = (63 - x.leading_zeros(), 63 - y.leading_zeros());
                if dx > dy {
                    x >>= dx - dy;
                } else {
                    y >>= dy - dx;
                }
                while x != y {
                    x >>= 1;
                    y >>= 1;
                }
                NodeRef(x)
            }
        }
    }

    /// Ancestors of `t`, root first, `t` last.
    pub fn ancestors(&self, t: NodeRef) -> Vec<NodeRef> {
        let mut out = Vec::with_capacity(self.depth(t) as usize + 1);
        let mut cur = Some(t);
        while let Some(v) = cur {
            out.push(v);
            cur = self.parent(v);
        }
        out.reverse();
        out
    }

    /// Order interval from `t` down to `s`, in root-to-leaf order.
    /// `closed` keeps `t`; otherwise the interval is `(t, s]`.
    /// Errors unless `t` precedes-or-equals `s`.
    pub fn order_interval(&self, t: NodeRef, s: NodeRef, closed: bool) -> Result<Vec<NodeRef>> {
        if !self.is_ancestor(t, s) {
            return Err(Error::BadNodeRef(format!(
                "order interval endpoints are not comparable ({} !<= {})",
                t.0, s.0
            )));
        }
        let mut out = Vec::with_capacity((self.depth(s) - self.depth(t) + 1) as usize);
        let mut cur = s;
        while cur != t {
            out.push(cur);
            cur = self.parent(cur).unwrap();
        }
        if closed {
            out.push(t);
        }
        out.reverse();
        Ok(out)
    }

    /// Dense index in `0..node_count()`: arena index for explicit trees,
    /// level for chains, heap code minus one (level order) for binary trees.
    pub fn dense_index(&self, t: NodeRef) -> u64 {
        let v = self.check(t);
        match &self.repr {
            Repr::Binary { .. } => v - 1,
            _ => v,
        }
    }

    /// Inverse of [`Tree::dense_index`].
    pub fn node_at(&self, dense: u64) -> NodeRef {
        let r = match &self.repr {
            Repr::Binary { .. } => NodeRef(dense + 1),
            _ => NodeRef(dense),
        };
        self.check(r);
        r
    }

    /// All nodes in dense order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeRef> + '_ {
        (0..self.node_count()).map(|i| self.node_at(i))
    }

    /// Node at a chain level.
    pub fn chain_node(&self, level: u32) -> Result<NodeRef> {
        match &self.repr {
            Repr::Chain { depth } if level <= *depth => Ok(NodeRef(level as u64)),
            Repr::Chain { depth } => Err(Error::BadNodeRef(format!(
                "level {level} beyond chain depth {depth}"
            ))),
            _ => Err(Error::UnsupportedShape("chain_node on a non-chain".into())),
        }
    }

    /// Node of an implicit binary tree from its root-to-node bit path
    /// (`bits` read MSB-first over `depth` steps; 0 = first child).
    pub fn binary_node(&self, depth: u32, bits: u64) -> Result<NodeRef> {
        match &self.repr {
            Repr::Binary { depth: d } if depth <= *d && (depth == 64 || bits < (1u64 << depth)) => {
                Ok(NodeRef((1u64 << depth) | bits))
            }
            Repr::Binary { .. } => Err(Error::BadNodeRef(format!(
                "bit path of length {depth} out of range"
            ))),
            _ => Err(Error::UnsupportedShape("binary_node on a non-binary tree".into())),
        }
    }

    /// External id (from the source document) of an explicit-tree node.
    pub fn external_id(&self, t: NodeRef) -> Option<u64> {
        let v = self.check(t);
        match &self.repr {
            Repr::Explicit(a) => Some(a.external_id[v as usize]),
            _ => None,
        }
    }

    /// Human-readable node label for reports.
    pub fn describe(&self, t: NodeRef) -> String {
        let v = self.check(t);
        match &self.repr {
            Repr::Explicit(a) => format!("id{}", a.external_id[v as usize]),
            Repr::Chain { .. } => format!("{v}"),
            Repr::Binary { .. } => {
                let d = 63 - v.leading_zeros();
                if d == 0 {
                    "root".into()
                } else {
                    format!("d{d}:{:0width$b}", v & !(1u64 << d), width = d as usize)
                }
            }
        }
    }
}
