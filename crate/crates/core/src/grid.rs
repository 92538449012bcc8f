//! Grid maps, cells, and the five-action move set.

use std::fmt;

use crate::error::ParseError;

/// A grid cell addressed as `(row, col)`. North is `row - 1`.
///
/// Coordinates are signed so that out-of-map neighbors can be represented
/// while scanning fields of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: i32,
    pub col: i32,
}

impl Cell {
    pub const fn new(row: i32, col: i32) -> Self {
        Self { row, col }
    }

    pub fn step(self, action: Action) -> Cell {
        let (dr, dc) = action.delta();
        Cell::new(self.row + dr, self.col + dc)
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.row - other.row).abs().max((self.col - other.col).abs())
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.row - other.row).abs() + (self.col - other.col).abs()
    }

    pub fn euclid_sq(self, other: Cell) -> i64 {
        let dr = (self.row - other.row) as i64;
        let dc = (self.col - other.col) as i64;
        dr * dr + dc * dc
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

impl From<(i32, i32)> for Cell {
    fn from((row, col): (i32, i32)) -> Self {
        Cell::new(row, col)
    }
}

/// One of the five single-step actions.
///
/// The index order (wait, north, east, south, west) is global: every label,
/// distribution and greedy vector in the crate uses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Action {
    Wait = 0,
    North = 1,
    East = 2,
    South = 3,
    West = 4,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; 5] = [
        Action::Wait,
        Action::North,
        Action::East,
        Action::South,
        Action::West,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    /// `(d_row, d_col)` displacement.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Wait => (0, 0),
            Action::North => (-1, 0),
            Action::East => (0, 1),
            Action::South => (1, 0),
            Action::West => (0, -1),
        }
    }

    /// The action that moves `from` to `to`, if they are equal or 4-adjacent.
    pub fn between(from: Cell, to: Cell) -> Option<Action> {
        let d = (to.row - from.row, to.col - from.col);
        Self::ALL.into_iter().find(|a| a.delta() == d)
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Wait => "wait",
            Action::North => "north",
            Action::East => "east",
            Action::South => "south",
            Action::West => "west",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A binary-obstacle grid, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    name: String,
    width: usize,
    height: usize,
    blocked: Vec<bool>,
}

impl GridMap {
    /// Builds a map from a row-major obstacle mask.
    ///
    /// Panics if the mask length is not `width * height` or a dimension is zero.
    pub fn new(name: impl Into<String>, width: usize, height: usize, blocked: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "map dimensions must be positive");
        assert_eq!(blocked.len(), width * height, "obstacle mask size mismatch");
        Self {
            name: name.into(),
            width,
            height,
            blocked,
        }
    }

    pub fn empty(name: impl Into<String>, width: usize, height: usize) -> Self {
        Self::new(name, width, height, vec![false; width * height])
    }

    /// Builds a map from ASCII rows using the `.map` body alphabet.
    pub fn from_rows(name: impl Into<String>, rows: &[&str]) -> Result<Self, ParseError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut text = format!("type octile\nheight {height}\nwidth {width}\nmap\n");
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        parse_map(&text, name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.row >= 0
            && cell.col >= 0
            && (cell.row as usize) < self.height
            && (cell.col as usize) < self.width
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, cell: Cell) -> Option<usize> {
        self.in_bounds(cell)
            .then(|| cell.row as usize * self.width + cell.col as usize)
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index / self.width) as i32, (index % self.width) as i32)
    }

    /// True for in-bounds cells without an obstacle.
    pub fn is_free(&self, cell: Cell) -> bool {
        self.index(cell).is_some_and(|i| !self.blocked[i])
    }

    pub fn is_blocked_index(&self, index: usize) -> bool {
        self.blocked[index]
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|b| **b).count()
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells())
            .filter(|&i| !self.blocked[i])
            .map(|i| self.cell_at(i))
    }

    /// Free 4-neighbors of `cell`.
    pub fn neighbors(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        Action::ALL[1..]
            .iter()
            .map(move |a| cell.step(*a))
            .filter(|c| self.is_free(*c))
    }

    /// Serializes back to the `.map` text format.
    pub fn to_map_text(&self) -> String {
        let mut out = format!(
            "type octile\nheight {}\nwidth {}\nmap\n",
            self.height, self.width
        );
        for row in self.blocked.chunks(self.width) {
            out.extend(row.iter().map(|&b| if b { '@' } else { '.' }));
            out.push('\n');
        }
        out
    }
}

/// Parses a Moving-AI `.map` file.
///
/// Line numbers in errors are 1-based. CRLF line endings are accepted.
pub fn parse_map(text: &str, name: impl Into<String>) -> Result<GridMap, ParseError> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).enumerate();
    let mut header = |expect: &str| -> Result<(usize, String), ParseError> {
        let (no, line) = lines.next().ok_or_else(|| ParseError::new(0, format!("missing `{expect}` header")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(expect) {
            return Err(ParseError::new(no + 1, format!("expected `{expect}` header, found `{line}`")));
        }
        Ok((no + 1, parts.collect::<Vec<_>>().join(" ")))
    };

    header("type")?;
    let (hline, h) = header("height")?;
    let height: usize = h
        .parse()
        .map_err(|_| ParseError::new(hline, format!("bad height `{h}`")))?;
    let (wline, w) = header("width")?;
    let width: usize = w
        .parse()
        .map_err(|_| ParseError::new(wline, format!("bad width `{w}`")))?;
    let (mline, rest) = header("map")?;
    if !rest.is_empty() {
        return Err(ParseError::new(mline, "unexpected text after `map`"));
    }
    if width == 0 || height == 0 {
        return Err(ParseError::new(hline, "map dimensions must be positive"));
    }

    let mut blocked = Vec::with_capacity(width * height);
    let mut rows = 0;
    for (no, line) in lines {
        if rows == height {
            if line.trim().is_empty() {
                continue;
            }
            return Err(ParseError::new(no + 1, format!("more than {height} body rows")));
        }
        if line.len() != width {
            return Err(ParseError::new(
                no + 1,
                format!("row has {} cells, expected {width}", line.len()),
            ));
        }
        for ch in line.chars() {
            blocked.push(match ch {
                '.' | 'G' => false,
                '@' | 'O' | 'T' => true,
                other => {
                    return Err(ParseError::new(no + 1, format!("unknown map character `{other}`")))
                }
            });
        }
        rows += 1;
    }
    if rows != height {
        return Err(ParseError::new(
            mline + rows + 1,
            format!("map body has {rows} rows, expected {height}"),
        ));
    }
    Ok(GridMap::new(name, width, height, blocked))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_body_has_no_obstacles() {
        let m = parse_map("type octile\nheight 3\nwidth 3\nmap\n...\n...\n...\n", "m").unwrap();
        assert_eq!((m.width(), m.height()), (3, 3));
        assert_eq!(m.blocked_count(), 0);
        assert_eq!(m.name(), "m");
    }

    #[test]
    fn obstacle_row_marks_center() {
        let m = parse_map("type octile\nheight 3\nwidth 3\nmap\n...\n.@.\n...\n", "m").unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(!m.is_free(Cell::new(r, c)), (r, c) == (1, 1));
            }
        }
    }

    #[test]
    fn short_body_is_an_error() {
        let err = parse_map("type octile\nheight 3\nwidth 3\nmap\n...\n...\n", "m").unwrap_err();
        assert!(err.to_string().contains("2 rows"), "{err}");
        assert_eq!(err.line, 7);
    }

    #[test]
    fn crlf_and_alternate_obstacles() {
        let m = parse_map("type octile\r\nheight 1\r\nwidth 4\r\nmap\r\nGOT.\r\n", "m").unwrap();
        assert!(m.is_free(Cell::new(0, 0)));
        assert!(!m.is_free(Cell::new(0, 1)));
        assert!(!m.is_free(Cell::new(0, 2)));
        assert!(m.is_free(Cell::new(0, 3)));
    }

    #[test]
    fn bad_rows_name_their_line() {
        let err = parse_map("type octile\nheight 2\nwidth 2\nmap\n..\n.x\n", "m").unwrap_err();
        assert_eq!(err.line, 6);
        let err = parse_map("type octile\nheight 2\nwidth 2\nmap\n...\n..\n", "m").unwrap_err();
        assert_eq!(err.line, 5);
        let err = parse_map("type octile\nwidth 2\nheight 2\nmap\n", "m").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn action_table() {
        assert_eq!(Action::North.delta(), (-1, 0));
        assert_eq!(Action::between(Cell::new(1, 1), Cell::new(1, 0)), Some(Action::West));
        assert_eq!(Action::between(Cell::new(1, 1), Cell::new(2, 2)), None);
        for (i, a) in Action::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(Action::from_index(i), Some(*a));
        }
    }
}
