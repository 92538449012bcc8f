//! Backward-Dijkstra cost-to-goal fields.
//!
//! Moves have unit cost on a 4-connected grid, so the backward Dijkstra
//! search reduces to a breadth-first sweep from the goal.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::HeuristicError;
use crate::grid::{Action, Cell, GridMap};

/// Stored distance for blocked or disconnected cells.
pub const UNREACHABLE: u32 = u32::MAX;

/// Exact shortest-path distance from every cell to one goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeuristicTable {
    goal: Cell,
    width: usize,
    height: usize,
    dist: Vec<u32>,
}

impl HeuristicTable {
    pub fn goal(&self) -> Cell {
        self.goal
    }

    /// Distance to the goal, `None` for off-map, blocked or disconnected cells.
    #[inline]
    pub fn get(&self, cell: Cell) -> Option<u32> {
        if cell.row < 0
            || cell.col < 0
            || cell.row as usize >= self.height
            || cell.col as usize >= self.width
        {
            return None;
        }
        let d = self.dist[cell.row as usize * self.width + cell.col as usize];
        (d != UNREACHABLE).then_some(d)
    }

    /// Raw row-major distances with [`UNREACHABLE`] sentinels.
    pub fn raw(&self) -> &[u32] {
        &self.dist
    }
}

/// BFS from `goal` over free 4-connected cells.
pub fn backward_dijkstra(map: &GridMap, goal: Cell) -> Result<HeuristicTable, HeuristicError> {
    let Some(goal_idx) = map.index(goal) else {
        return Err(HeuristicError::OutOfBounds(goal));
    };
    if map.is_blocked_index(goal_idx) {
        return Err(HeuristicError::Blocked(goal));
    }
    let mut dist = vec![UNREACHABLE; map.num_cells()];
    dist[goal_idx] = 0;
    let mut queue = VecDeque::from([goal]);
    while let Some(cell) = queue.pop_front() {
        let next = dist[map.index(cell).unwrap()] + 1;
        for n in map.neighbors(cell) {
            let i = map.index(n).unwrap();
            if dist[i] == UNREACHABLE {
                dist[i] = next;
                queue.push_back(n);
            }
        }
    }
    Ok(HeuristicTable {
        goal,
        width: map.width(),
        height: map.height(),
        dist,
    })
}

/// Marks every legal action (wait included) whose resulting cell has minimal
/// distance to the goal.
pub fn greedy_action_vector(
    table: &HeuristicTable,
    pos: Cell,
    map: &GridMap,
) -> Result<[bool; Action::COUNT], HeuristicError> {
    if table.get(pos).is_none() {
        return Err(HeuristicError::Unreachable(pos));
    }
    let values = Action::ALL.map(|a| {
        let next = pos.step(a);
        if map.is_free(next) {
            table.get(next)
        } else {
            None
        }
    });
    let best = values.iter().flatten().min().copied();
    Ok(values.map(|v| v.is_some() && v == best))
}

/// Per-map cache of heuristic tables keyed by goal.
///
/// Lookups for different goals proceed in parallel; concurrent requests for
/// the same goal compute the table once.
#[derive(Debug)]
pub struct HeuristicCache {
    map: Arc<GridMap>,
    tables: Mutex<HashMap<Cell, Arc<OnceLock<Arc<HeuristicTable>>>>>,
}

impl HeuristicCache {
    pub fn new(map: Arc<GridMap>) -> Self {
        Self {
            map,
            tables: Mutex::new(HashMap::new()),
        }
    }

    pub fn map(&self) -> &Arc<GridMap> {
        &self.map
    }

    pub fn get(&self, goal: Cell) -> Result<Arc<HeuristicTable>, HeuristicError> {
        if !self.map.is_free(goal) {
            return backward_dijkstra(&self.map, goal).map(Arc::new);
        }
        let slot = {
            let mut tables = self.tables.lock().unwrap();
            Arc::clone(tables.entry(goal).or_default())
        };
        Ok(Arc::clone(slot.get_or_init(|| {
            Arc::new(backward_dijkstra(&self.map, goal).expect("goal checked free"))
        })))
    }

    pub fn len(&self) -> usize {
        self.tables.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(rows: &[&str]) -> GridMap {
        GridMap::from_rows("t", rows).unwrap()
    }

    #[test]
    fn empty_map_is_manhattan() {
        let m = map(&["...", "...", "..."]);
        let t = backward_dijkstra(&m, Cell::new(0, 0)).unwrap();
        assert_eq!(t.get(Cell::new(2, 2)), Some(4));
        assert_eq!(t.get(Cell::new(0, 0)), Some(0));
    }

    #[test]
    fn center_obstacle_keeps_corner_distance() {
        // Hand BFS: (0,0)->(0,1)->(0,2)->(1,2)->(2,2) is still length 4.
        let m = map(&["...", ".@.", "..."]);
        let t = backward_dijkstra(&m, Cell::new(0, 0)).unwrap();
        assert_eq!(t.get(Cell::new(2, 2)), Some(4));
        assert_eq!(t.get(Cell::new(1, 1)), None);
    }

    #[test]
    fn walled_off_cells_are_unreachable() {
        let m = map(&["..@.", "..@.", "..@."]);
        let t = backward_dijkstra(&m, Cell::new(0, 0)).unwrap();
        assert_eq!(t.get(Cell::new(1, 3)), None);
        assert_eq!(t.raw()[m.index(Cell::new(1, 3)).unwrap()], UNREACHABLE);
        assert_eq!(t.get(Cell::new(-1, 0)), None);
    }

    #[test]
    fn bad_goals() {
        let m = map(&[".@"]);
        assert_eq!(
            backward_dijkstra(&m, Cell::new(0, 1)),
            Err(HeuristicError::Blocked(Cell::new(0, 1)))
        );
        assert!(matches!(
            backward_dijkstra(&m, Cell::new(3, 0)),
            Err(HeuristicError::OutOfBounds(_))
        ));
    }

    #[test]
    fn greedy_vector_cases() {
        let m = map(&["...", "...", "..."]);
        let t = backward_dijkstra(&m, Cell::new(0, 0)).unwrap();
        assert_eq!(
            greedy_action_vector(&t, Cell::new(1, 1), &m).unwrap(),
            [false, true, false, false, true]
        );
        assert_eq!(
            greedy_action_vector(&t, Cell::new(0, 0), &m).unwrap(),
            [true, false, false, false, false]
        );
    }

    #[test]
    fn greedy_vector_in_corridor() {
        // Goal at the bottom of a dead-end corridor entered from the east.
        let m = map(&["@@@@", "@...", "@.@@", "@.@@"]);
        let goal = Cell::new(3, 1);
        let t = backward_dijkstra(&m, goal).unwrap();
        // At (1,2) the only way toward the goal is west.
        let v = greedy_action_vector(&t, Cell::new(1, 2), &m).unwrap();
        assert_eq!(v, [false, false, false, false, true]);
        let v = greedy_action_vector(&t, Cell::new(2, 1), &m).unwrap();
        assert_eq!(v, [false, false, false, true, false]);
    }

    #[test]
    fn greedy_vector_rejects_unreachable() {
        let m = map(&[".@."]);
        let t = backward_dijkstra(&m, Cell::new(0, 0)).unwrap();
        assert!(greedy_action_vector(&t, Cell::new(0, 2), &m).is_err());
    }

    #[test]
    fn cache_shares_tables() {
        let m = Arc::new(map(&["...", "..."]));
        let cache = HeuristicCache::new(m);
        let a = cache.get(Cell::new(0, 0)).unwrap();
        let b = cache.get(Cell::new(0, 0)).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        cache.get(Cell::new(1, 2)).unwrap();
        assert_eq!(cache.len(), 2);
    }
}
