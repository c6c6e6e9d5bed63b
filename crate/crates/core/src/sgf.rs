//! SGF FF[4] reader and writer.
//!
//! The parser keeps the whole game tree so records can be written back out
//! unchanged apart from comments this tool adds. Analysis only ever looks at
//! the main line (first variation at every branch point).

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::board::{from_sgf_coord, to_sgf_coord, Color, Move, MoveKind, Point, MAX_SIZE, MIN_SIZE};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Property {
    pub ident: String,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Node {
    pub properties: Vec<Property>,
}

impl Node {
    pub fn get(&self, ident: &str) -> Option<&Property> {
        self.properties.iter().find(|p| p.ident == ident)
    }

    pub fn first_value(&self, ident: &str) -> Option<&str> {
        self.get(ident).and_then(|p| p.values.first()).map(String::as_str)
    }

    fn get_mut(&mut self, ident: &str) -> Option<&mut Property> {
        self.properties.iter_mut().find(|p| p.ident == ident)
    }
}

#[derive(Debug, Default)]
pub struct GameTree {
    pub nodes: Vec<Node>,
    pub variations: Vec<GameTree>,
}

// Nested variations are released iteratively; a recursive drop of a
// pathologically deep tree would overflow the stack.
impl Drop for GameTree {
    fn drop(&mut self) {
        let mut pending = std::mem::take(&mut self.variations);
        while let Some(mut t) = pending.pop() {
            pending.append(&mut t.variations);
        }
    }
}

// Equality and cloning walk the tree with an explicit stack, like `Drop`.
impl PartialEq for GameTree {
    fn eq(&self, other: &Self) -> bool {
        let mut pending = vec![(self, other)];
        while let Some((a, b)) = pending.pop() {
            if a.nodes != b.nodes || a.variations.len() != b.variations.len() {
                return false;
            }
            pending.extend(a.variations.iter().zip(&b.variations));
        }
        true
    }
}

impl Eq for GameTree {}

impl Clone for GameTree {
    fn clone(&self) -> Self {
        // Pre-order listing with parent links, then assembly from the leaves up.
        let mut order: Vec<(&GameTree, Option<usize>)> = vec![(self, None)];
        let mut i = 0;
        while i < order.len() {
            let t = order[i].0;
            order.extend(t.variations.iter().map(|v| (v, Some(i))));
            i += 1;
        }
        let mut built: Vec<Option<GameTree>> = (0..order.len()).map(|_| None).collect();
        let mut children: Vec<Vec<GameTree>> = (0..order.len()).map(|_| Vec::new()).collect();
        for idx in (0..order.len()).rev() {
            let (src, parent) = order[idx];
            let mut variations = std::mem::take(&mut children[idx]);
            variations.reverse();
            let tree = GameTree { nodes: src.nodes.clone(), variations };
            match parent {
                Some(p) => children[p].push(tree),
                None => built[idx] = Some(tree),
            }
        }
        built[0].take().expect("root is assembled last")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Collection {
    pub trees: Vec<GameTree>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SgfError {
    #[error("SGF syntax error at byte {offset}: expected {expected}, found {found}")]
    Parse { offset: usize, expected: String, found: String },
    #[error("invalid game record: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlayerNames {
    pub black: Option<String>,
    pub white: Option<String>,
}

/// The analysis-relevant content of a game record plus the retained tree.
#[derive(Clone, Debug, PartialEq)]
pub struct GameRecord {
    pub size: u8,
    pub komi: f64,
    pub handicap: u32,
    pub setup_stones: Vec<(Color, Point)>,
    pub moves: Vec<Move>,
    pub player_names: PlayerNames,
    pub result: Option<String>,
    pub raw_tree: Collection,
    /// For each entry of `moves`, the index of its node along the main line.
    move_nodes: Vec<usize>,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn error(&self, expected: &str) -> SgfError {
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(_) => {
                let rest = String::from_utf8_lossy(&self.src[self.pos..]);
                format!("{:?}", rest.chars().next().unwrap_or('?'))
            }
        };
        SgfError::Parse { offset: self.pos, expected: expected.to_string(), found }
    }

    fn property(&mut self) -> Result<Property, SgfError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        let ident = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        let mut values = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() != Some(b'[') {
                break;
            }
            self.pos += 1;
            values.push(self.value()?);
        }
        if values.is_empty() {
            return Err(self.error("'['"));
        }
        Ok(Property { ident, values })
    }

    fn value(&mut self) -> Result<String, SgfError> {
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.error("']'")),
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => {
                    self.pos += 1;
                    match self.peek() {
                        None => return Err(self.error("escaped character")),
                        Some(c) => {
                            out.push(c);
                            self.pos += 1;
                        }
                    }
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
        Ok(String::from_utf8_lossy(&out).into_owned())
    }

    /// Iterative so that deeply nested input cannot exhaust the stack.
    fn collection(&mut self, warnings: &mut Vec<String>) -> Result<Collection, SgfError> {
        let mut trees = Vec::new();
        let mut stack: Vec<GameTree> = Vec::new();
        self.skip_ws();
        if self.peek() != Some(b'(') {
            match self.src.iter().position(|&c| c == b'(') {
                Some(i) if self.pos < i => {
                    warnings.push(format!("skipped {} bytes before the first game tree", i - self.pos));
                    self.pos = i;
                }
                _ => return Err(self.error("'('")),
            }
        }
        loop {
            self.skip_ws();
            match (self.peek(), stack.last_mut()) {
                (Some(b'('), None) => {
                    self.pos += 1;
                    stack.push(GameTree::default());
                }
                (Some(b'('), Some(top)) => {
                    if top.nodes.is_empty() {
                        return Err(self.error("';'"));
                    }
                    self.pos += 1;
                    stack.push(GameTree::default());
                }
                (Some(b';'), Some(top)) => {
                    if !top.variations.is_empty() {
                        return Err(self.error("'(' or ')'"));
                    }
                    self.pos += 1;
                    let mut node = Node::default();
                    loop {
                        self.skip_ws();
                        match self.peek() {
                            Some(c) if c.is_ascii_alphabetic() => node.properties.push(self.property()?),
                            Some(b';') | Some(b'(') | Some(b')') | None => break,
                            Some(_) => return Err(self.error("property identifier")),
                        }
                    }
                    stack.last_mut().expect("nonempty").nodes.push(node);
                }
                (Some(b')'), Some(top)) => {
                    if top.nodes.is_empty() {
                        return Err(self.error("';'"));
                    }
                    self.pos += 1;
                    let done = stack.pop().expect("nonempty");
                    match stack.last_mut() {
                        Some(parent) => parent.variations.push(done),
                        None => trees.push(done),
                    }
                }
                (None, Some(_)) => return Err(self.error("')'")),
                (None, None) => break,
                (Some(_), Some(_)) => return Err(self.error("';', '(' or ')'")),
                (Some(_), None) => {
                    warnings.push(format!("ignored {} trailing bytes", self.src.len() - self.pos));
                    break;
                }
            }
        }
        Ok(Collection { trees })
    }
}

/// Parses the game-tree grammar only.
pub fn parse_collection(bytes: &[u8]) -> Result<(Collection, Vec<String>), SgfError> {
    let text = String::from_utf8_lossy(bytes);
    let mut warnings = Vec::new();
    if let std::borrow::Cow::Owned(_) = text {
        warnings.push("input is not valid UTF-8; invalid sequences replaced".to_string());
    }
    let mut parser = Parser { src: text.as_bytes(), pos: 0 };
    let collection = parser.collection(&mut warnings)?;
    Ok((collection, warnings))
}

/// Parses an SGF document into a [`GameRecord`] plus warnings for every
/// tolerated irregularity.
pub fn parse_sgf(bytes: &[u8]) -> Result<(GameRecord, Vec<String>), SgfError> {
    let (collection, mut warnings) = parse_collection(bytes)?;
    let record = GameRecord::from_collection(collection, &mut warnings)?;
    Ok((record, warnings))
}

fn main_line(tree: &GameTree) -> Vec<&Node> {
    let mut out = Vec::new();
    let mut t = tree;
    loop {
        out.extend(t.nodes.iter());
        match t.variations.first() {
            Some(v) => t = v,
            None => return out,
        }
    }
}

fn main_line_node_mut(tree: &mut GameTree, mut k: usize) -> Option<&mut Node> {
    let mut t = tree;
    loop {
        if k < t.nodes.len() {
            return t.nodes.get_mut(k);
        }
        k -= t.nodes.len();
        t = t.variations.first_mut()?;
    }
}

fn expand_points(values: &[String], size: u8, warnings: &mut Vec<String>) -> Vec<Point> {
    let mut out = Vec::new();
    for v in values {
        let (a, b) = match v.split_once(':') {
            Some((a, b)) => (a, b),
            None => (v.as_str(), v.as_str()),
        };
        match (from_sgf_coord(a, size), from_sgf_coord(b, size)) {
            (Ok(MoveKind::Play(p)), Ok(MoveKind::Play(q))) => {
                for col in p.col.min(q.col)..=p.col.max(q.col) {
                    for row in p.row.min(q.row)..=p.row.max(q.row) {
                        out.push(Point::new(col, row));
                    }
                }
            }
            _ => warnings.push(format!("ignored invalid setup point {v:?}")),
        }
    }
    out
}

impl GameRecord {
    fn from_collection(collection: Collection, warnings: &mut Vec<String>) -> Result<Self, SgfError> {
        let tree = collection
            .trees
            .first()
            .ok_or_else(|| SgfError::Invalid("empty collection".into()))?;
        if collection.trees.len() > 1 {
            warnings.push(format!(
                "collection holds {} games; only the first is used",
                collection.trees.len()
            ));
        }
        let nodes = main_line(tree);
        let root = nodes[0];

        if let Some(gm) = root.first_value("GM") {
            if gm.trim() != "1" {
                warnings.push(format!("GM[{gm}] is not Go"));
            }
        }
        if let Some(ca) = root.first_value("CA") {
            if !ca.trim().eq_ignore_ascii_case("utf-8") {
                warnings.push(format!("CA[{ca}] ignored; input decoded as UTF-8"));
            }
        }

        let size = match root.first_value("SZ") {
            None => 19,
            Some(sz) => {
                let sz = sz.trim();
                let (w, h) = sz.split_once(':').unwrap_or((sz, sz));
                match (w.trim().parse::<u8>(), h.trim().parse::<u8>()) {
                    (Ok(w), Ok(h)) if w == h => w,
                    _ => return Err(SgfError::Invalid(format!("unsupported board size SZ[{sz}]"))),
                }
            }
        };
        if !(MIN_SIZE..=MAX_SIZE).contains(&size) {
            return Err(SgfError::Invalid(format!("unsupported board size {size}")));
        }

        let komi = match root.first_value("KM") {
            None => {
                warnings.push("no KM property; komi taken as 0".into());
                0.0
            }
            Some(km) => match km.trim().parse::<f64>() {
                Ok(k) if k.is_finite() => k,
                _ => return Err(SgfError::Invalid(format!("invalid komi KM[{km}]"))),
            },
        };

        let handicap = match root.first_value("HA") {
            None => 0,
            Some(ha) => ha.trim().parse::<u32>().unwrap_or_else(|_| {
                warnings.push(format!("ignored invalid HA[{ha}]"));
                0
            }),
        };

        let mut setup_stones = Vec::new();
        let mut moves = Vec::new();
        let mut move_nodes = Vec::new();
        for (k, node) in nodes.iter().enumerate() {
            for (ident, color) in [("AB", Color::Black), ("AW", Color::White)] {
                if let Some(prop) = node.get(ident) {
                    if moves.is_empty() {
                        for p in expand_points(&prop.values, size, warnings) {
                            setup_stones.push((color, p));
                        }
                    } else {
                        warnings.push(format!("setup property {ident} in node {k} after play started ignored"));
                    }
                }
            }
            if node.get("AE").is_some() {
                warnings.push(format!("AE in node {k} ignored"));
            }
            let mut played = false;
            for (ident, color) in [("B", Color::Black), ("W", Color::White)] {
                let Some(value) = node.first_value(ident) else { continue };
                if played {
                    warnings.push(format!("node {k} holds both B and W; second move ignored"));
                    continue;
                }
                match from_sgf_coord(value, size) {
                    Ok(kind) => {
                        if let Some(prev) = moves.last() {
                            let prev: &Move = prev;
                            if prev.color == color {
                                warnings.push(format!(
                                    "move {} repeats color {} (no alternation)",
                                    moves.len() + 1,
                                    color
                                ));
                            }
                        }
                        moves.push(Move { color, kind });
                        move_nodes.push(k);
                        played = true;
                    }
                    Err(_) => warnings.push(format!("ignored invalid move {ident}[{value}] in node {k}")),
                }
            }
        }
        if handicap >= 2 {
            let black_setup = setup_stones.iter().filter(|(c, _)| *c == Color::Black).count();
            if black_setup != handicap as usize {
                warnings.push(format!("HA[{handicap}] but {black_setup} black setup stones"));
            }
        }

        let player_names = PlayerNames {
            black: root.first_value("PB").map(str::to_string),
            white: root.first_value("PW").map(str::to_string),
        };
        let result = root.first_value("RE").map(str::to_string);

        Ok(GameRecord {
            size,
            komi,
            handicap,
            setup_stones,
            moves,
            player_names,
            result,
            raw_tree: collection,
            move_nodes,
        })
    }

    /// Builds a fresh record (a single main line) from its parts.
    pub fn new(size: u8, komi: f64, setup_stones: Vec<(Color, Point)>, moves: Vec<Move>) -> Self {
        let mut root = Node::default();
        let push = |node: &mut Node, ident: &str, value: String| {
            node.properties.push(Property { ident: ident.into(), values: vec![value] })
        };
        push(&mut root, "GM", "1".into());
        push(&mut root, "FF", "4".into());
        push(&mut root, "CA", "UTF-8".into());
        push(&mut root, "SZ", size.to_string());
        push(&mut root, "KM", format_komi(komi));
        let handicap = setup_stones.iter().filter(|(c, _)| *c == Color::Black).count() as u32;
        let handicap = if handicap >= 2 && setup_stones.iter().all(|(c, _)| *c == Color::Black) {
            push(&mut root, "HA", handicap.to_string());
            handicap
        } else {
            0
        };
        for (ident, color) in [("AB", Color::Black), ("AW", Color::White)] {
            let values: Vec<String> = setup_stones
                .iter()
                .filter(|(c, _)| *c == color)
                .map(|(_, p)| to_sgf_coord(MoveKind::Play(*p)))
                .collect();
            if !values.is_empty() {
                root.properties.push(Property { ident: ident.into(), values });
            }
        }
        let mut nodes = vec![root];
        let mut move_nodes = Vec::new();
        for (i, mv) in moves.iter().enumerate() {
            let mut node = Node::default();
            push(&mut node, &mv.color.letter().to_string(), to_sgf_coord(mv.kind));
            nodes.push(node);
            move_nodes.push(i + 1);
        }
        GameRecord {
            size,
            komi,
            handicap,
            setup_stones,
            moves,
            player_names: PlayerNames::default(),
            result: None,
            raw_tree: Collection { trees: vec![GameTree { nodes, variations: Vec::new() }] },
            move_nodes,
        }
    }

    fn root_mut(&mut self) -> &mut Node {
        &mut self.raw_tree.trees[0].nodes[0]
    }

    fn set_root_property(&mut self, ident: &str, value: String) {
        let root = self.root_mut();
        match root.get_mut(ident) {
            Some(p) => p.values = vec![value],
            None => root.properties.push(Property { ident: ident.into(), values: vec![value] }),
        }
    }

    pub fn set_player_names(&mut self, black: &str, white: &str) {
        self.set_root_property("PB", black.to_string());
        self.set_root_property("PW", white.to_string());
        self.player_names = PlayerNames { black: Some(black.into()), white: Some(white.into()) };
    }

    pub fn set_result(&mut self, result: &str) {
        self.set_root_property("RE", result.to_string());
        self.result = Some(result.into());
    }

    /// Main-line node index holding move `turn`.
    pub fn move_node(&self, turn: usize) -> Option<usize> {
        self.move_nodes.get(turn).copied()
    }

    /// The comment on the node holding move `turn`.
    pub fn comment(&self, turn: usize) -> Option<&str> {
        let k = self.move_node(turn)?;
        main_line(&self.raw_tree.trees[0]).get(k)?.first_value("C")
    }

    /// Appends `text` to the comment of the node holding move `turn`
    /// (newline separated when a comment already exists).
    pub fn annotate_move(&mut self, turn: usize, text: &str) -> bool {
        let Some(k) = self.move_node(turn) else { return false };
        let Some(node) = main_line_node_mut(&mut self.raw_tree.trees[0], k) else { return false };
        match node.get_mut("C") {
            Some(p) if !p.values.is_empty() => {
                let v = &mut p.values[0];
                if !v.is_empty() {
                    v.push('\n');
                }
                v.push_str(text);
            }
            _ => node.properties.push(Property { ident: "C".into(), values: vec![text.to_string()] }),
        }
        true
    }
}

fn format_komi(komi: f64) -> String {
    if komi.fract() == 0.0 {
        format!("{komi:.0}")
    } else {
        format!("{komi}")
    }
}

fn escape_into(out: &mut String, value: &str) {
    for c in value.chars() {
        if c == ']' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
}

fn write_node(out: &mut String, node: &Node) {
    out.push(';');
    for prop in &node.properties {
        out.push_str(&prop.ident);
        for v in &prop.values {
            out.push('[');
            escape_into(out, v);
            out.push(']');
        }
    }
}

fn write_tree(out: &mut String, tree: &GameTree) {
    enum Step<'t> {
        Open(&'t GameTree),
        Close,
    }
    let mut steps = vec![Step::Open(tree)];
    let mut first = true;
    while let Some(step) = steps.pop() {
        match step {
            Step::Close => out.push(')'),
            Step::Open(t) => {
                if !first {
                    out.push('\n');
                }
                first = false;
                out.push('(');
                for (i, node) in t.nodes.iter().enumerate() {
                    if i > 0 {
                        out.push('\n');
                    }
                    write_node(out, node);
                }
                steps.push(Step::Close);
                steps.extend(t.variations.iter().rev().map(Step::Open));
            }
        }
    }
}

pub fn write_collection(collection: &Collection) -> Vec<u8> {
    let mut out = String::new();
    for tree in &collection.trees {
        write_tree(&mut out, tree);
        out.push('\n');
    }
    out.into_bytes()
}

/// Serializes the record's retained tree, including any comments added via
/// [`GameRecord::annotate_move`].
pub fn write_sgf(record: &GameRecord) -> Vec<u8> {
    write_collection(&record.raw_tree)
}

impl fmt::Display for Collection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        for t in &self.trees {
            write_tree(&mut s, t);
        }
        f.write_str(&s)
    }
}

/// Short human-readable summary used in logs.
pub fn describe(record: &GameRecord) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{}x{} komi {} handicap {} moves {}",
        record.size,
        record.size,
        record.komi,
        record.handicap,
        record.moves.len()
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_record() {
        let (r, _) = parse_sgf(b"(;GM[1]FF[4]SZ[19]KM[7.5];B[pd];W[dp])").unwrap();
        assert_eq!(r.size, 19);
        assert_eq!(r.komi, 7.5);
        assert_eq!(r.moves.len(), 2);
        assert_eq!(r.moves[0].color, Color::Black);
        assert_eq!(r.moves[1].kind, MoveKind::Play(Point::new(3, 15)));
    }

    #[test]
    fn main_line_follows_first_variation() {
        let src = b"(;SZ[9]KM[6.5];B[ee](;W[cc];B[gg])(;W[gc]))";
        let (r, _) = parse_sgf(src).unwrap();
        assert_eq!(r.moves.len(), 3);
        assert_eq!(r.moves[1].kind, MoveKind::Play(Point::new(2, 2)));
        assert_eq!(r.raw_tree.trees[0].variations.len(), 2);
    }

    #[test]
    fn unbalanced_reports_end_of_input() {
        let err = parse_sgf(b"(;SZ[19]").unwrap_err();
        match err {
            SgfError::Parse { offset, expected, found } => {
                assert_eq!(offset, 8);
                assert_eq!(expected, "')'");
                assert_eq!(found, "end of input");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_bracket() {
        let err = parse_sgf(b"(;SZ[19)").unwrap_err();
        assert!(matches!(err, SgfError::Parse { ref expected, .. } if expected == "']'"), "{err:?}");
        let err = parse_sgf(b"(;SZ 19)").unwrap_err();
        assert!(matches!(err, SgfError::Parse { ref expected, .. } if expected == "'['"));
    }

    #[test]
    fn empty_tree_rejected() {
        assert!(matches!(parse_sgf(b"()"), Err(SgfError::Parse { .. })));
        assert!(matches!(parse_sgf(b""), Err(SgfError::Parse { .. })));
    }

    #[test]
    fn escapes_survive() {
        let src = br"(;SZ[9]C[a \] b \\ c];B[aa])";
        let (r, _) = parse_sgf(src).unwrap();
        assert_eq!(r.raw_tree.trees[0].nodes[0].first_value("C"), Some(r"a ] b \ c"));
        let (again, _) = parse_sgf(&write_sgf(&r)).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn pass_and_setup() {
        let (r, w) = parse_sgf(b"(;SZ[19]KM[0.5]HA[2]AB[dd][pp];W[];B[tt])").unwrap();
        assert_eq!(r.handicap, 2);
        assert_eq!(r.setup_stones.len(), 2);
        assert_eq!(r.moves, vec![Move::pass(Color::White), Move::pass(Color::Black)]);
        assert!(w.is_empty(), "{w:?}");
    }

    #[test]
    fn compressed_point_list() {
        let (r, _) = parse_sgf(b"(;SZ[9]KM[0]AB[aa:bc])").unwrap();
        assert_eq!(r.setup_stones.len(), 6);
    }

    #[test]
    fn alternation_violation_is_warning() {
        let (r, w) = parse_sgf(b"(;SZ[9]KM[0];B[aa];B[bb])").unwrap();
        assert_eq!(r.moves.len(), 2);
        assert!(w.iter().any(|w| w.contains("alternation")));
    }

    #[test]
    fn unknown_properties_preserved() {
        let src = b"(;SZ[9]KM[0]XY[foo][bar];B[aa]ZZ[q])";
        let (r, _) = parse_sgf(src).unwrap();
        let out = String::from_utf8(write_sgf(&r)).unwrap();
        assert!(out.contains("XY[foo][bar]"));
        assert!(out.contains("ZZ[q]"));
    }

    #[test]
    fn annotation_round_trip() {
        let (mut r, _) = parse_sgf(b"(;SZ[9]KM[6.5];B[ee]C[old];W[cc])").unwrap();
        assert!(r.annotate_move(0, "effect -0.50 ]tricky\\"));
        assert!(r.annotate_move(1, "effect +1.25"));
        assert!(!r.annotate_move(2, "nope"));
        let (again, _) = parse_sgf(&write_sgf(&r)).unwrap();
        assert_eq!(again.comment(0), Some("old\neffect -0.50 ]tricky\\"));
        assert_eq!(again.comment(1), Some("effect +1.25"));
    }

    #[test]
    fn invalid_size_and_komi() {
        assert!(matches!(parse_sgf(b"(;SZ[25])"), Err(SgfError::Invalid(_))));
        assert!(matches!(parse_sgf(b"(;SZ[19]KM[abc])"), Err(SgfError::Invalid(_))));
        assert!(matches!(parse_sgf(b"(;SZ[19]KM[inf])"), Err(SgfError::Invalid(_))));
    }

    #[test]
    fn deep_nesting_does_not_overflow() {
        let mut src = String::from("(;SZ[9]");
        for _ in 0..100_000 {
            src.push_str("(;B[aa]");
        }
        for _ in 0..100_000 {
            src.push(')');
        }
        src.push(')');
        let (c, _) = parse_collection(src.as_bytes()).unwrap();
        assert_eq!(c.trees.len(), 1);
        let out = write_collection(&c);
        assert_eq!(out.len(), src.len() + 100_000 + 1);
    }

    #[test]
    fn built_record_round_trips() {
        let moves = vec![Move::play(Color::Black, Point::new(4, 4)), Move::pass(Color::White)];
        let mut r = GameRecord::new(9, 5.5, vec![], moves);
        r.set_player_names("a", "b");
        r.set_result("B+R");
        let (again, w) = parse_sgf(&write_sgf(&r)).unwrap();
        assert!(w.is_empty(), "{w:?}");
        assert_eq!(again, r);
    }
}
