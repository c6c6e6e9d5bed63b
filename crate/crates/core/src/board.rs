//! Minimal Go rules: stone placement, captures, simple ko and suicide, plus
//! conversion between SGF letter-pair and engine (GTP-style) coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sgf::GameRecord;

pub const MIN_SIZE: u8 = 9;
pub const MAX_SIZE: u8 = 19;

/// Column letters used by engine coordinates; `I` is skipped.
const ENGINE_COLUMNS: &[u8] = b"ABCDEFGHJKLMNOPQRSTUVWXYZ";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    Black,
    White,
}

impl Color {
    pub fn opposite(self) -> Color {
        match self {
            Color::Black => Color::White,
            Color::White => Color::Black,
        }
    }

    /// +1 for Black, -1 for White. Multiplying a Black-positive quantity by
    /// this gives the quantity from this color's point of view.
    pub fn sign(self) -> f64 {
        match self {
            Color::Black => 1.0,
            Color::White => -1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Color::Black => 0,
            Color::White => 1,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Color::Black => 'B',
            Color::White => 'W',
        }
    }

    pub fn from_letter(c: &str) -> Option<Color> {
        match c {
            "B" | "b" => Some(Color::Black),
            "W" | "w" => Some(Color::White),
            _ => None,
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Color::Black => "black",
            Color::White => "white",
        })
    }
}

/// An intersection. `row` 0 is the top edge (SGF orientation).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub col: u8,
    pub row: u8,
}

impl Point {
    pub fn new(col: u8, row: u8) -> Self {
        Point { col, row }
    }

    pub fn on_board(self, size: u8) -> bool {
        self.col < size && self.row < size
    }

    /// Row-major index from the top-left corner, the layout engines use for
    /// policy vectors.
    pub fn index(self, size: u8) -> usize {
        self.row as usize * size as usize + self.col as usize
    }

    pub fn from_index(index: usize, size: u8) -> Self {
        let s = size as usize;
        Point::new((index % s) as u8, (index / s) as u8)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    Play(Point),
    Pass,
}

impl MoveKind {
    /// Index into a `size² + 1` policy vector; pass is the trailing entry.
    pub fn policy_index(self, size: u8) -> usize {
        match self {
            MoveKind::Play(p) => p.index(size),
            MoveKind::Pass => size as usize * size as usize,
        }
    }

    pub fn from_policy_index(index: usize, size: u8) -> Self {
        if index == size as usize * size as usize {
            MoveKind::Pass
        } else {
            MoveKind::Play(Point::from_index(index, size))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Move {
    pub color: Color,
    pub kind: MoveKind,
}

impl Move {
    pub fn play(color: Color, point: Point) -> Self {
        Move { color, kind: MoveKind::Play(point) }
    }

    pub fn pass(color: Color) -> Self {
        Move { color, kind: MoveKind::Pass }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stone {
    Empty,
    Black,
    White,
}

impl From<Color> for Stone {
    fn from(c: Color) -> Self {
        match c {
            Color::Black => Stone::Black,
            Color::White => Stone::White,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IllegalReason {
    Occupied,
    Suicide,
    KoViolation,
    OffBoard,
    OutOfTurn,
}

impl fmt::Display for IllegalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IllegalReason::Occupied => "point is occupied",
            IllegalReason::Suicide => "suicide",
            IllegalReason::KoViolation => "simple ko recapture",
            IllegalReason::OffBoard => "point is off the board",
            IllegalReason::OutOfTurn => "wrong color to move",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BoardError {
    #[error("illegal move {mv:?}: {reason}")]
    IllegalMove { mv: Move, reason: IllegalReason },
    #[error("illegal move at turn {turn}: {reason}")]
    IllegalAtTurn { turn: usize, reason: IllegalReason },
    #[error("malformed coordinate {0:?}")]
    MalformedCoordinate(String),
    #[error("unsupported board size {0}")]
    UnsupportedSize(u8),
}

impl BoardError {
    pub fn reason(&self) -> Option<IllegalReason> {
        match self {
            BoardError::IllegalMove { reason, .. } | BoardError::IllegalAtTurn { reason, .. } => {
                Some(*reason)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoardState {
    size: u8,
    grid: Vec<Stone>,
    to_move: Color,
    ko_point: Option<Point>,
    /// Stones captured *by* each color, indexed by `Color::index`.
    captures: [u32; 2],
    turn_index: usize,
    consecutive_passes: u8,
}

impl BoardState {
    pub fn new(size: u8) -> Result<Self, BoardError> {
        if !(MIN_SIZE..=MAX_SIZE).contains(&size) {
            return Err(BoardError::UnsupportedSize(size));
        }
        Ok(BoardState {
            size,
            grid: vec![Stone::Empty; size as usize * size as usize],
            to_move: Color::Black,
            ko_point: None,
            captures: [0, 0],
            turn_index: 0,
            consecutive_passes: 0,
        })
    }

    /// Places setup stones (handicap / AB / AW). Setup stones are not moves:
    /// they do not capture, advance the turn index or create a ko point.
    pub fn with_setup(mut self, stones: &[(Color, Point)]) -> Result<Self, BoardError> {
        for &(color, point) in stones {
            if !point.on_board(self.size) {
                return Err(BoardError::IllegalMove {
                    mv: Move::play(color, point),
                    reason: IllegalReason::OffBoard,
                });
            }
            self.grid[point.index(self.size)] = color.into();
        }
        Ok(self)
    }

    pub fn size(&self) -> u8 {
        self.size
    }

    pub fn to_move(&self) -> Color {
        self.to_move
    }

    pub fn set_to_move(&mut self, color: Color) {
        self.to_move = color;
    }

    pub fn ko_point(&self) -> Option<Point> {
        self.ko_point
    }

    pub fn captures(&self, by: Color) -> u32 {
        self.captures[by.index()]
    }

    pub fn turn_index(&self) -> usize {
        self.turn_index
    }

    /// Two passes in a row end the game.
    pub fn is_over(&self) -> bool {
        self.consecutive_passes >= 2
    }

    pub fn stone(&self, p: Point) -> Stone {
        self.grid[p.index(self.size)]
    }

    pub fn count(&self, stone: Stone) -> usize {
        self.grid.iter().filter(|&&s| s == stone).count()
    }

    pub fn stones(&self) -> impl Iterator<Item = (Point, Color)> + '_ {
        self.grid.iter().enumerate().filter_map(move |(i, s)| {
            let p = Point::from_index(i, self.size);
            match s {
                Stone::Black => Some((p, Color::Black)),
                Stone::White => Some((p, Color::White)),
                Stone::Empty => None,
            }
        })
    }

    fn neighbors(&self, p: Point) -> impl Iterator<Item = Point> {
        let size = self.size;
        let (c, r) = (p.col as i16, p.row as i16);
        [(c - 1, r), (c + 1, r), (c, r - 1), (c, r + 1)]
            .into_iter()
            .filter(move |&(c, r)| c >= 0 && r >= 0 && c < size as i16 && r < size as i16)
            .map(|(c, r)| Point::new(c as u8, r as u8))
    }

    /// The chain containing `p` and whether it has at least one liberty.
    fn chain(&self, p: Point) -> (Vec<Point>, usize) {
        let color = self.stone(p);
        let mut seen = vec![false; self.grid.len()];
        let mut liberties = vec![false; self.grid.len()];
        let mut stack = vec![p];
        let mut chain = Vec::new();
        seen[p.index(self.size)] = true;
        while let Some(q) = stack.pop() {
            chain.push(q);
            for n in self.neighbors(q) {
                let ni = n.index(self.size);
                match self.grid[ni] {
                    Stone::Empty => liberties[ni] = true,
                    s if s == color && !seen[ni] => {
                        seen[ni] = true;
                        stack.push(n);
                    }
                    _ => {}
                }
            }
        }
        (chain, liberties.iter().filter(|&&l| l).count())
    }

    /// Number of liberties of the chain through `p`; 0 for an empty point.
    pub fn liberties(&self, p: Point) -> usize {
        if self.stone(p) == Stone::Empty {
            return 0;
        }
        self.chain(p).1
    }

    /// Checks whether `mv` could be played without changing the state.
    pub fn check(&self, mv: Move) -> Result<(), IllegalReason> {
        self.clone().play_in_place(mv, false).map(|_| ())
    }

    /// Applies a move and returns the successor state. The receiver is left
    /// untouched.
    pub fn apply_move(&self, mv: Move) -> Result<BoardState, BoardError> {
        let mut next = self.clone();
        next.play_in_place(mv, false)
            .map_err(|reason| BoardError::IllegalMove { mv, reason })?;
        Ok(next)
    }

    /// Like [`apply_move`](Self::apply_move) but plays suicides (removing the
    /// suicided chain) and ko recaptures anyway. Occupied and off-board
    /// points are still rejected.
    pub fn apply_move_lenient(&self, mv: Move) -> Result<(BoardState, Option<IllegalReason>), BoardError> {
        let mut next = self.clone();
        let warning = next
            .play_in_place(mv, true)
            .map_err(|reason| BoardError::IllegalMove { mv, reason })?;
        Ok((next, warning))
    }

    fn play_in_place(&mut self, mv: Move, lenient: bool) -> Result<Option<IllegalReason>, IllegalReason> {
        if mv.color != self.to_move {
            return Err(IllegalReason::OutOfTurn);
        }
        let point = match mv.kind {
            MoveKind::Pass => {
                self.ko_point = None;
                self.to_move = mv.color.opposite();
                self.turn_index += 1;
                self.consecutive_passes = self.consecutive_passes.saturating_add(1);
                return Ok(None);
            }
            MoveKind::Play(p) => p,
        };
        if !point.on_board(self.size) {
            return Err(IllegalReason::OffBoard);
        }
        let idx = point.index(self.size);
        if self.grid[idx] != Stone::Empty {
            return Err(IllegalReason::Occupied);
        }
        let mut warning = None;
        if self.ko_point == Some(point) {
            if !lenient {
                return Err(IllegalReason::KoViolation);
            }
            warning = Some(IllegalReason::KoViolation);
        }

        let own: Stone = mv.color.into();
        let opponent: Stone = mv.color.opposite().into();
        self.grid[idx] = own;

        let mut captured: Vec<Point> = Vec::new();
        for n in self.neighbors(point).collect::<Vec<_>>() {
            if self.grid[n.index(self.size)] == opponent {
                let (chain, libs) = self.chain(n);
                if libs == 0 {
                    for q in chain {
                        let qi = q.index(self.size);
                        if self.grid[qi] != Stone::Empty {
                            self.grid[qi] = Stone::Empty;
                            captured.push(q);
                        }
                    }
                }
            }
        }

        let (own_chain, own_libs) = self.chain(point);
        if own_libs == 0 {
            if !lenient {
                self.grid[idx] = Stone::Empty;
                return Err(IllegalReason::Suicide);
            }
            for q in &own_chain {
                self.grid[q.index(self.size)] = Stone::Empty;
            }
            self.captures[mv.color.opposite().index()] += own_chain.len() as u32;
            warning = Some(IllegalReason::Suicide);
        }

        self.captures[mv.color.index()] += captured.len() as u32;
        // Simple ko: a single stone that captured exactly one stone and is
        // left alone with one liberty may not be recaptured immediately.
        self.ko_point = if captured.len() == 1 && own_chain.len() == 1 && own_libs == 1 {
            Some(captured[0])
        } else {
            None
        };
        self.to_move = mv.color.opposite();
        self.turn_index += 1;
        self.consecutive_passes = 0;
        Ok(warning)
    }
}

impl fmt::Display for BoardState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in 0..self.size {
            for col in 0..self.size {
                let c = match self.stone(Point::new(col, row)) {
                    Stone::Empty => '.',
                    Stone::Black => 'X',
                    Stone::White => 'O',
                };
                write!(f, "{}", c)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Engine coordinate such as `Q16` (column letter skipping `I`, row counted
/// from the bottom). Pass is `"pass"`.
pub fn to_engine_coord(kind: MoveKind, size: u8) -> String {
    match kind {
        MoveKind::Pass => "pass".to_string(),
        MoveKind::Play(p) => {
            format!("{}{}", ENGINE_COLUMNS[p.col as usize] as char, size - p.row)
        }
    }
}

pub fn from_engine_coord(text: &str, size: u8) -> Result<MoveKind, BoardError> {
    let malformed = || BoardError::MalformedCoordinate(text.to_string());
    let t = text.trim();
    if t.eq_ignore_ascii_case("pass") {
        return Ok(MoveKind::Pass);
    }
    let mut chars = t.chars();
    let letter = chars.next().ok_or_else(malformed)?.to_ascii_uppercase();
    let col = ENGINE_COLUMNS
        .iter()
        .position(|&c| c as char == letter)
        .ok_or_else(malformed)?;
    let number: u32 = chars.as_str().parse().map_err(|_| malformed())?;
    if col >= size as usize || number == 0 || number > size as u32 {
        return Err(malformed());
    }
    Ok(MoveKind::Play(Point::new(col as u8, (size as u32 - number) as u8)))
}

/// SGF letter pair such as `pd`; pass is the empty string.
pub fn to_sgf_coord(kind: MoveKind) -> String {
    match kind {
        MoveKind::Pass => String::new(),
        MoveKind::Play(p) => {
            let mut s = String::with_capacity(2);
            s.push(sgf_letter(p.col));
            s.push(sgf_letter(p.row));
            s
        }
    }
}

fn sgf_letter(v: u8) -> char {
    if v < 26 {
        (b'a' + v) as char
    } else {
        (b'A' + v - 26) as char
    }
}

fn sgf_value(c: u8) -> Option<u8> {
    match c {
        b'a'..=b'z' => Some(c - b'a'),
        b'A'..=b'Z' => Some(c - b'A' + 26),
        _ => None,
    }
}

/// Parses an SGF point. Empty text, and `tt` on boards up to 19x19, mean pass.
pub fn from_sgf_coord(text: &str, size: u8) -> Result<MoveKind, BoardError> {
    let malformed = || BoardError::MalformedCoordinate(text.to_string());
    let b = text.trim().as_bytes();
    if b.is_empty() || (b == b"tt" && size <= 19) {
        return Ok(MoveKind::Pass);
    }
    if b.len() != 2 {
        return Err(malformed());
    }
    let col = sgf_value(b[0]).ok_or_else(malformed)?;
    let row = sgf_value(b[1]).ok_or_else(malformed)?;
    let p = Point::new(col, row);
    if !p.on_board(size) {
        return Err(malformed());
    }
    Ok(MoveKind::Play(p))
}

/// Positions s0..sn of a replayed record and the moves that produced them.
#[derive(Clone, Debug)]
pub struct Replay {
    pub states: Vec<BoardState>,
    /// Moves actually applied; `moves[i]` takes `states[i]` to `states[i + 1]`.
    pub moves: Vec<Move>,
    /// Index into the record's move list for each applied move.
    pub source_turns: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Replays the main line of `record` from its setup position.
///
/// Out-of-turn moves are always accepted with a warning. With `lenient`
/// set, suicides and ko recaptures are played with a warning and moves onto
/// occupied or off-board points are skipped; otherwise they fail with the
/// offending turn index.
pub fn replay(record: &GameRecord, lenient: bool) -> Result<Replay, BoardError> {
    let mut state = BoardState::new(record.size)?.with_setup(&record.setup_stones)?;
    if let Some(first) = record.moves.first() {
        state.set_to_move(first.color);
    }
    let mut out = Replay {
        states: vec![state.clone()],
        moves: Vec::new(),
        source_turns: Vec::new(),
        warnings: Vec::new(),
    };
    for (turn, &mv) in record.moves.iter().enumerate() {
        if mv.color != state.to_move() {
            if turn > 0 {
                out.warnings.push(format!("turn {turn}: {} moves out of turn", mv.color));
            }
            state.set_to_move(mv.color);
        }
        let attempt = if lenient { state.apply_move_lenient(mv) } else { state.apply_move(mv).map(|s| (s, None)) };
        match attempt {
            Ok((next, warning)) => {
                if let Some(reason) = warning {
                    out.warnings.push(format!("turn {turn}: {reason} played anyway"));
                }
                state = next;
                out.states.push(state.clone());
                out.moves.push(mv);
                out.source_turns.push(turn);
            }
            Err(e) => {
                let reason = e.reason().unwrap_or(IllegalReason::OffBoard);
                if !lenient {
                    return Err(BoardError::IllegalAtTurn { turn, reason });
                }
                out.warnings.push(format!("turn {turn}: {reason}; move skipped"));
                // Keep the alternation the record intended.
                state.set_to_move(mv.color.opposite());
            }
        }
    }
    Ok(out)
}
