use rand::Rng;
use serde::{Deserialize, Serialize};

/// A contiguous slice of a model's flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn of<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.offset..self.offset + self.len]
    }

    pub fn of_mut<'a>(&self, p: &'a mut [f64]) -> &'a mut [f64] {
        &mut p[self.offset..self.offset + self.len]
    }
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Glorot { fan_in: usize, fan_out: usize },
    Const(f64),
}

#[derive(Debug, Default)]
pub struct ParamBuilder {
    len: usize,
    inits: Vec<(Segment, Init)>,
}

impl ParamBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Weight block initialized Glorot-uniform.
    pub fn weights(&mut self, len: usize, fan_in: usize, fan_out: usize) -> Segment {
        self.push(len, Init::Glorot { fan_in, fan_out })
    }

    pub fn constant(&mut self, len: usize, value: f64) -> Segment {
        self.push(len, Init::Const(value))
    }

    fn push(&mut self, len: usize, init: Init) -> Segment {
        let seg = Segment {
            offset: self.len,
            len,
        };
        self.len += len;
        self.inits.push((seg, init));
        seg
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn initialize<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.len];
        for (seg, init) in &self.inits {
            let s = seg.of_mut(&mut p);
            match *init {
                Init::Glorot { fan_in, fan_out } => {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    s.iter_mut().for_each(|v| *v = rng.gen_range(-limit..limit));
                }
                Init::Const(c) => s.iter_mut().for_each(|v| *v = c),
            }
        }
        p
    }
}
