//! Dense occupancy map on a cube centred at the origin. The cube doubles
//! whenever a site outside it is inserted; queries outside the cube report
//! "empty".

use crate::lattice::{box_sites, Dim, Site, MAX_DIM};

const EMPTY: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct Occupancy {
    dim: Dim,
    half: i32,
    side: usize,
    strides: [usize; MAX_DIM],
    cells: Vec<u32>,
    count: usize,
}

impl Occupancy {
    pub fn new(dim: Dim, half: i32) -> Self {
        let half = half.max(4);
        let side = (2 * half + 1) as usize;
        let d = dim.get();
        let mut strides = [0usize; MAX_DIM];
        let mut acc = 1usize;
        for axis in (0..d).rev() {
            strides[axis] = acc;
            acc *= side;
        }
        Occupancy { dim, half, side, strides, cells: vec![EMPTY; acc], count: 0 }
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    fn index(&self, s: &Site) -> Option<usize> {
        let mut idx = 0usize;
        for axis in 0..self.dim.get() {
            let c = s.coord(axis);
            if c < -self.half || c > self.half {
                return None;
            }
            idx += (c + self.half) as usize * self.strides[axis];
        }
        Some(idx)
    }

    #[inline]
    pub fn contains(&self, s: &Site) -> bool {
        match self.index(s) {
            Some(i) => self.cells[i] != EMPTY,
            None => false,
        }
    }

    /// Label stored at `s`, if occupied.
    #[inline]
    pub fn label(&self, s: &Site) -> Option<u32> {
        self.index(s).map(|i| self.cells[i]).filter(|&l| l != EMPTY)
    }

    /// Stores `label` at `s`; returns the previous label.
    pub fn set(&mut self, s: Site, label: u32) -> Option<u32> {
        debug_assert_ne!(label, EMPTY);
        let i = match self.index(&s) {
            Some(i) => i,
            None => {
                self.grow_to(s.max_abs());
                self.index(&s).expect("grown grid contains site")
            }
        };
        let prev = self.cells[i];
        self.cells[i] = label;
        if prev == EMPTY {
            self.count += 1;
            None
        } else {
            Some(prev)
        }
    }

    pub fn insert(&mut self, s: Site) -> bool {
        let label = self.count as u32;
        if self.contains(&s) {
            return false;
        }
        self.set(s, label);
        true
    }

    pub fn remove(&mut self, s: &Site) -> Option<u32> {
        let i = self.index(s)?;
        let prev = self.cells[i];
        if prev == EMPTY {
            return None;
        }
        self.cells[i] = EMPTY;
        self.count -= 1;
        Some(prev)
    }

    fn grow_to(&mut self, needed: i32) {
        let mut half = self.half;
        while half < needed {
            half *= 2;
        }
        let mut next = Occupancy::new(self.dim, half);
        for s in box_sites(self.dim, self.half) {
            if let Some(l) = self.label(&s) {
                next.set(s, l);
            }
        }
        *self = next;
    }

    /// Occupied sites in lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(self.count);
        for s in box_sites(self.dim, self.half) {
            if self.contains(&s) {
                out.push(s);
            }
        }
        out
    }

    /// Half-width of the backing cube.
    pub fn half_width(&self) -> i32 {
        self.half
    }

    pub fn side(&self) -> usize {
        self.side
    }
}
