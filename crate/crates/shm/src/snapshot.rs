/// An N-cell atomic snapshot. Each `update` and `snapshot` call is executed
/// inside a single scheduler step, which is what makes it atomic here.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AtomicSnapshot<T> {
    cells: Vec<Option<T>>,
}

impl<T: Clone> AtomicSnapshot<T> {
    pub fn new(n: usize) -> Self {
        AtomicSnapshot {
            cells: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn update(&mut self, cell: usize, value: T) {
        self.cells[cell] = Some(value);
    }

    pub fn snapshot(&self) -> Vec<Option<T>> {
        self.cells.clone()
    }

    /// Read-only view of the current contents without copying, for checkers.
    pub fn peek(&self) -> &[Option<T>] {
        &self.cells
    }
}
