//! The unified user–item–entity graph and its neighbor sampling.
//!
//! Users and knowledge-graph entities are merged into one node space.
//! Items are entities (the default alignment is the identity; an explicit
//! item→entity table can be supplied instead), and every user–item
//! interaction becomes an edge labeled with a reserved relation `r*` that
//! is one larger than the largest knowledge-graph relation id. Entity ids
//! keep their values; user `u` becomes node `n_entities + u`.
//!
//! Adjacency is undirected: each triple `(h, r, t)` is indexed under both
//! endpoints. Per node, edges are sorted by `(relation, neighbor)` and
//! deduplicated, which puts the interaction edges in a contiguous suffix
//! (since `r*` sorts last) — the two neighbor classes are slices of the
//! same list.
//!
//! Sampling returns fixed-size neighbor lists: without replacement when a
//! node has at least `size` neighbors of the class, with replacement
//! otherwise. A node with no neighbors of the class yields an explicit
//! [`NeighborSample::Empty`] marker; substituting a self-loop is the
//! consumer's decision, made at aggregation time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Node index in the unified graph (entities first, then users).
pub type NodeId = u32;

/// Relation index; the reserved interaction relation `r*` is included.
pub type RelationId = u32;

/// One knowledge-graph triple in entity id space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

/// Deduplicated positive interactions with per-user adjacency.
#[derive(Clone, Debug)]
pub struct InteractionMatrix {
    n_users: u32,
    items: Vec<u32>,
    pairs: Vec<(u32, u32)>,
    by_user: Vec<Vec<u32>>,
}

impl InteractionMatrix {
    /// Build from raw `(user, item)` positives: sorts, deduplicates, and
    /// indexes per user. At least one pair is required.
    pub fn from_pairs(mut pairs: Vec<(u32, u32)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput(
                "interaction set is empty (nothing survived parsing/thresholding)".into(),
            ));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let n_users = pairs.iter().map(|&(u, _)| u).max().unwrap() + 1;
        let mut by_user = vec![Vec::new(); n_users as usize];
        let mut items: Vec<u32> = Vec::new();
        for &(u, i) in &pairs {
            by_user[u as usize].push(i);
            items.push(i);
        }
        items.sort_unstable();
        items.dedup();
        Ok(InteractionMatrix {
            n_users,
            items,
            pairs,
            by_user,
        })
    }

    /// Number of user ids (max id + 1; users without positives count).
    pub fn n_users(&self) -> u32 {
        self.n_users
    }

    /// Distinct interacted items, ascending. This is the candidate universe
    /// for negative sampling and ranking.
    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn n_items(&self) -> u32 {
        self.items.len() as u32
    }

    /// All `(user, item)` positives, sorted ascending.
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    /// Items the user interacted with, ascending. Empty for unseen users.
    pub fn items_of(&self, user: u32) -> &[u32] {
        self.by_user
            .get(user as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn is_positive(&self, user: u32, item: u32) -> bool {
        self.items_of(user).binary_search(&item).is_ok()
    }

    /// A matrix holding `pairs` but keeping this matrix's user and item
    /// universes. Split handling needs this: a subset of the positives
    /// (say the training part) must still declare every user and every
    /// candidate item of the dataset it came from, or node tables and
    /// ranking candidate sets would silently shrink with the subset.
    pub fn with_pairs(&self, mut pairs: Vec<(u32, u32)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput(
                "interaction subset is empty".into(),
            ));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut by_user = vec![Vec::new(); self.n_users as usize];
        for &(u, i) in &pairs {
            if u >= self.n_users || self.items.binary_search(&i).is_err() {
                return Err(Error::InvalidInput(format!(
                    "pair ({u}, {i}) lies outside the declared universe \
                     of {} users and {} items",
                    self.n_users,
                    self.items.len()
                )));
            }
            by_user[u as usize].push(i);
        }
        Ok(InteractionMatrix {
            n_users: self.n_users,
            items: self.items.clone(),
            pairs,
            by_user,
        })
    }

    /// Re-map item ids through an item→entity alignment table. Items
    /// missing from the table are reported as invalid input.
    pub fn align_items(&self, alignment: &BTreeMap<u32, u32>) -> Result<Self> {
        let mut missing = BTreeSet::new();
        let mut mapped = Vec::with_capacity(self.pairs.len());
        for &(u, i) in &self.pairs {
            match alignment.get(&i) {
                Some(&e) => mapped.push((u, e)),
                None => {
                    missing.insert(i);
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::InvalidInput(offender_list(
                "interactions reference items with no KG alignment entry",
                &missing,
            )));
        }
        InteractionMatrix::from_pairs(mapped)
    }
}

/// How to turn interaction rows into binary positives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdRule {
    /// Ratings column present → keep ratings ≥ 4; absent → keep all rows.
    Auto,
    /// Keep every row regardless of any rating column.
    KeepAll,
    /// Keep rows with rating ≥ the given value (requires a rating column).
    AtLeast(f64),
}

/// Default rating cutoff applied by [`ThresholdRule::Auto`] on explicit
/// 1–5 rating files.
pub const DEFAULT_RATING_THRESHOLD: f64 = 4.0;

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn parse_field<T: std::str::FromStr>(
    tok: &str,
    path: &Path,
    line: usize,
    what: &str,
) -> Result<T> {
    tok.trim().parse::<T>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {what} from {tok:?}"),
    })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Load `head \t relation \t tail` triples. `#` comments and blank lines
/// are skipped; anything else malformed is an error with its line number.
pub fn load_kg_triples(path: &Path) -> Result<Vec<Triple>> {
    let text = read_file(path)?;
    let mut triples = Vec::new();
    for (line, raw) in data_lines(&text) {
        let mut cols = raw.split('\t');
        let (h, r, t) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
            (Some(h), Some(r), Some(t), None) => (h, r, t),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!(
                        "expected 3 tab-separated columns (head, relation, tail), got {:?}",
                        raw
                    ),
                })
            }
        };
        triples.push(Triple {
            head: parse_field(h, path, line, "head entity id")?,
            relation: parse_field(r, path, line, "relation id")?,
            tail: parse_field(t, path, line, "tail entity id")?,
        });
    }
    if triples.is_empty() {
        return Err(Error::InvalidInput(format!(
            "knowledge graph file {} contains no triples",
            path.display()
        )));
    }
    Ok(triples)
}

/// Load `user \t item [\t rating]` rows and apply the threshold rule.
/// The column count must be consistent across the file.
pub fn load_interactions(path: &Path, rule: ThresholdRule) -> Result<InteractionMatrix> {
    let text = read_file(path)?;
    let mut pairs = Vec::new();
    let mut has_rating: Option<bool> = None;
    for (line, raw) in data_lines(&text) {
        let cols: Vec<&str> = raw.split('\t').collect();
        let with_rating = match cols.len() {
            2 => false,
            3 => true,
            n => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected 2 or 3 tab-separated columns, got {n}"),
                })
            }
        };
        match has_rating {
            None => has_rating = Some(with_rating),
            Some(prev) if prev != with_rating => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: "inconsistent column count: rating column must appear on \
                              every row or none"
                        .into(),
                })
            }
            _ => {}
        }
        let user: u32 = parse_field(cols[0], path, line, "user id")?;
        let item: u32 = parse_field(cols[1], path, line, "item id")?;
        let keep = match (rule, with_rating) {
            (ThresholdRule::KeepAll, _) => true,
            (ThresholdRule::Auto, false) => true,
            (ThresholdRule::Auto, true) => {
                let rating: f64 = parse_field(cols[2], path, line, "rating")?;
                rating >= DEFAULT_RATING_THRESHOLD
            }
            (ThresholdRule::AtLeast(t), true) => {
                let rating: f64 = parse_field(cols[2], path, line, "rating")?;
                rating >= t
            }
            (ThresholdRule::AtLeast(_), false) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: "a rating threshold was requested but the file has no \
                              rating column"
                        .into(),
                })
            }
        };
        if keep {
            pairs.push((user, item));
        }
    }
    InteractionMatrix::from_pairs(pairs)
}

/// Load an `item \t entity` alignment table. Duplicate items mapping to
/// different entities are rejected.
pub fn load_alignment(path: &Path) -> Result<BTreeMap<u32, u32>> {
    let text = read_file(path)?;
    let mut map = BTreeMap::new();
    for (line, raw) in data_lines(&text) {
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected 2 tab-separated columns, got {}", cols.len()),
            });
        }
        let item: u32 = parse_field(cols[0], path, line, "item id")?;
        let entity: u32 = parse_field(cols[1], path, line, "entity id")?;
        if let Some(&prev) = map.get(&item) {
            if prev != entity {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!(
                        "item {item} is aligned to both entity {prev} and entity {entity}"
                    ),
                });
            }
        }
        map.insert(item, entity);
    }
    if map.is_empty() {
        return Err(Error::InvalidInput(format!(
            "alignment file {} contains no entries",
            path.display()
        )));
    }
    Ok(map)
}

fn offender_list(prefix: &str, ids: &BTreeSet<u32>) -> String {
    let mut msg = format!("{prefix}: ");
    for (k, id) in ids.iter().take(10).enumerate() {
        if k > 0 {
            msg.push_str(", ");
        }
        let _ = write!(msg, "{id}");
    }
    if ids.len() > 10 {
        let _ = write!(msg, " … and {} more", ids.len() - 10);
    }
    msg
}

/// Derive an independent seed from a base seed and a tag path, so every
/// random stream in a run (split shuffle, epoch shuffles, per-pair
/// evaluation sampling, …) is a pure function of the run seed and its
/// address. Uses the splitmix64 finalizer per step.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    fn mix(x: u64) -> u64 {
        let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mut state = mix(base);
    for &t in tags {
        // Multiply-then-add keeps the fold positional: swapping the base
        // with a tag, or two tags with each other, lands elsewhere.
        state = mix(state.wrapping_mul(0xA24B_AED4_963E_E407).wrapping_add(mix(t)));
    }
    state
}

/// Which edges of a node to look at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborClass {
    /// Edges labeled with the reserved interaction relation `r*`.
    Interaction,
    /// All other (knowledge-graph) edges.
    Knowledge,
}

/// Users and entities merged into one adjacency structure.
#[derive(Clone, Debug)]
pub struct UnifiedKnowledgeGraph {
    n_entities: u32,
    n_users: u32,
    n_kg_relations: u32,
    items: Vec<u32>,
    adjacency: Vec<Vec<(RelationId, NodeId)>>,
    /// Per node, index of the first interaction edge in its sorted list.
    interaction_start: Vec<u32>,
}

/// Build the unified graph. `alignment` maps interaction item ids to KG
/// entity ids; `None` means the identity (item ids already are entity
/// ids). Returns the graph together with the interactions re-expressed in
/// entity id space.
pub fn build_ukg(
    triples: &[Triple],
    interactions: &InteractionMatrix,
    alignment: Option<&BTreeMap<u32, u32>>,
) -> Result<(UnifiedKnowledgeGraph, InteractionMatrix)> {
    if triples.is_empty() {
        return Err(Error::InvalidInput("no knowledge-graph triples given".into()));
    }

    let mut entity_ids = BTreeSet::new();
    let mut max_relation = 0u32;
    for t in triples {
        entity_ids.insert(t.head);
        entity_ids.insert(t.tail);
        max_relation = max_relation.max(t.relation);
    }
    let n_entities = entity_ids.iter().next_back().unwrap() + 1;

    let aligned = match alignment {
        Some(map) => interactions.align_items(map)?,
        None => interactions.clone(),
    };

    // Every item must exist as a KG entity, or its KG neighborhood would
    // be undefined.
    let unknown: BTreeSet<u32> = aligned
        .items()
        .iter()
        .copied()
        .filter(|i| !entity_ids.contains(i))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::InvalidInput(offender_list(
            "interactions reference item entities absent from the knowledge graph",
            &unknown,
        )));
    }

    let n_users = aligned.n_users();
    let n_kg_relations = max_relation + 1;
    let r_star = n_kg_relations;
    let n_nodes = (n_entities + n_users) as usize;

    let mut adjacency: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n_nodes];
    for t in triples {
        adjacency[t.head as usize].push((t.relation, t.tail));
        adjacency[t.tail as usize].push((t.relation, t.head));
    }
    for &(u, i) in aligned.pairs() {
        let user_node = n_entities + u;
        adjacency[user_node as usize].push((r_star, i));
        adjacency[i as usize].push((r_star, user_node));
    }

    let mut interaction_start = Vec::with_capacity(n_nodes);
    for list in adjacency.iter_mut() {
        list.sort_unstable();
        list.dedup();
        interaction_start.push(list.partition_point(|&(r, _)| r < r_star) as u32);
    }

    Ok((
        UnifiedKnowledgeGraph {
            n_entities,
            n_users,
            n_kg_relations,
            items: aligned.items().to_vec(),
            adjacency,
            interaction_start,
        },
        aligned,
    ))
}

impl UnifiedKnowledgeGraph {
    pub fn n_entities(&self) -> u32 {
        self.n_entities
    }

    pub fn n_users(&self) -> u32 {
        self.n_users
    }

    pub fn n_nodes(&self) -> u32 {
        self.n_entities + self.n_users
    }

    /// Item entity ids, ascending.
    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn n_items(&self) -> u32 {
        self.items.len() as u32
    }

    /// Relation vocabulary size including the interaction relation.
    pub fn n_relations(&self) -> u32 {
        self.n_kg_relations + 1
    }

    /// The reserved interaction relation `r*`.
    pub fn interaction_relation(&self) -> RelationId {
        self.n_kg_relations
    }

    /// Unified node id of a user.
    pub fn user_node(&self, user: u32) -> NodeId {
        self.n_entities + user
    }

    /// Edges of one class, sorted by `(relation, neighbor)`.
    pub fn neighbors(&self, node: NodeId, class: NeighborClass) -> &[(RelationId, NodeId)] {
        let list = &self.adjacency[node as usize];
        let split = self.interaction_start[node as usize] as usize;
        match class {
            NeighborClass::Knowledge => &list[..split],
            NeighborClass::Interaction => &list[split..],
        }
    }

    /// Total degree (both classes, deduplicated edges).
    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node as usize].len()
    }

    /// `(degree, node count)` rows, ascending by degree.
    pub fn degree_histogram(&self) -> Vec<(usize, u64)> {
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for list in &self.adjacency {
            *counts.entry(list.len()).or_insert(0) += 1;
        }
        counts.into_iter().collect()
    }
}

/// A fixed-size draw from one node's neighbors of one class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NeighborSample {
    /// Exactly the requested number of `(relation, neighbor)` edges:
    /// a subset without replacement when the node has enough neighbors,
    /// a with-replacement multiset otherwise.
    Drawn(Vec<(RelationId, NodeId)>),
    /// The node has no neighbors of the class. The consumer substitutes a
    /// self-loop where an aggregate is required.
    Empty,
}

impl NeighborSample {
    pub fn edges(&self) -> &[(RelationId, NodeId)] {
        match self {
            NeighborSample::Drawn(edges) => edges,
            NeighborSample::Empty => &[],
        }
    }

    pub fn is_empty_marker(&self) -> bool {
        matches!(self, NeighborSample::Empty)
    }
}

/// Draw a fixed-size neighbor sample for `node`.
pub fn sample_neighbors<R: Rng>(
    ukg: &UnifiedKnowledgeGraph,
    node: NodeId,
    class: NeighborClass,
    size: usize,
    rng: &mut R,
) -> NeighborSample {
    let list = ukg.neighbors(node, class);
    if list.is_empty() {
        return NeighborSample::Empty;
    }
    let edges = if list.len() >= size {
        rand::seq::index::sample(rng, list.len(), size)
            .into_iter()
            .map(|k| list[k])
            .collect()
    } else {
        (0..size).map(|_| list[rng.gen_range(0..list.len())]).collect()
    };
    NeighborSample::Drawn(edges)
}

/// All neighbor draws one scoring pass needs for a `(user, item)` pair.
#[derive(Clone, Debug)]
pub struct SampledNeighborhood {
    /// Unified node id of the user.
    pub user_node: NodeId,
    /// Item entity id (= its unified node id).
    pub item: NodeId,
    /// Items around the user (interaction class).
    pub user_items: NeighborSample,
    /// Users around the item (interaction class).
    pub item_users: NeighborSample,
    /// `kg_layers[l-1][k]`: knowledge-class sample for the k-th node of
    /// layer `l-1`, layers ordered `1..=depth`. Layer 0 is `[item]`;
    /// layer `l`'s nodes are the drawn neighbors of layer `l-1` in order
    /// (empty markers contribute none).
    pub kg_layers: Vec<Vec<NeighborSample>>,
}

impl SampledNeighborhood {
    /// Node ids of layer `l` (0 = the item itself).
    pub fn layer_nodes(&self, l: usize) -> Vec<NodeId> {
        if l == 0 {
            return vec![self.item];
        }
        self.kg_layers[l - 1]
            .iter()
            .flat_map(|s| s.edges().iter().map(|&(_, n)| n))
            .collect()
    }
}

/// Sample everything the forward pass needs for `(user, item)`:
/// the user's items, the item's users, and `depth` layers of knowledge
/// neighbors radiating from the item. The random stream is consumed in
/// exactly that order, so one seeded generator reproduces the draw.
pub fn sample_khop<R: Rng>(
    ukg: &UnifiedKnowledgeGraph,
    user: u32,
    item: NodeId,
    depth: usize,
    size: usize,
    rng: &mut R,
) -> SampledNeighborhood {
    let user_node = ukg.user_node(user);
    let user_items = sample_neighbors(ukg, user_node, NeighborClass::Interaction, size, rng);
    let item_users = sample_neighbors(ukg, item, NeighborClass::Interaction, size, rng);

    let mut kg_layers = Vec::with_capacity(depth);
    let mut frontier = vec![item];
    for _ in 0..depth {
        let samples: Vec<NeighborSample> = frontier
            .iter()
            .map(|&n| sample_neighbors(ukg, n, NeighborClass::Knowledge, size, rng))
            .collect();
        frontier = samples
            .iter()
            .flat_map(|s| s.edges().iter().map(|&(_, n)| n))
            .collect();
        kg_layers.push(samples);
    }

    SampledNeighborhood {
        user_node,
        item,
        user_items,
        item_users,
        kg_layers,
    }
}
