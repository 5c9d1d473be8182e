use super::{Cell, Dir, EnvState, TaskKind, TaskSpec};
use crate::Code;

/// Layout-independent encoding of agent configurations.
///
/// Codes `[0, P)` place the agent at (cell, facing, situation) regardless of
/// what the cell holds, so an agent standing on lava is encodable but is not
/// an MDP state. Codes `[P, 2P)` are "twin" variants (a second agent marker
/// drawn on the grid), always off-MDP. Code `2P` is the shared lava sink.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateCodec {
    pub width: usize,
    pub height: usize,
    pub facings: usize,
    pub situations: usize,
}

impl StateCodec {
    pub fn for_spec(spec: &TaskSpec) -> Self {
        Self {
            width: spec.width,
            height: spec.height,
            facings: if spec.action_space.has_facing() { 4 } else { 1 },
            situations: if spec.kind == TaskKind::Ssm { 4 } else { 1 },
        }
    }

    pub fn product_size(&self) -> usize {
        self.width * self.height * self.facings * self.situations
    }

    pub fn total_codes(&self) -> usize {
        2 * self.product_size() + 1
    }

    pub fn with_parts(&self, cell: Cell, facing: Option<Dir>, situation: usize) -> Code {
        let f = if self.facings == 1 { 0 } else { facing.map_or(0, Dir::index) };
        let sit = situation.min(self.situations - 1);
        (((sit * self.height + cell.1) * self.width + cell.0) * self.facings + f) as Code
    }

    /// Code of the agent placement in `state`; the terminal flag is ignored.
    pub fn encode(&self, state: &EnvState) -> Code {
        self.with_parts(state.pos, state.facing, state.situation())
    }

    pub fn twin(&self, code: Code) -> Code {
        debug_assert!((code as usize) < self.product_size());
        code + self.product_size() as Code
    }

    pub fn dead_code(&self) -> Code {
        (2 * self.product_size()) as Code
    }

    pub fn is_twin(&self, code: Code) -> bool {
        let c = code as usize;
        c >= self.product_size() && c < 2 * self.product_size()
    }

    /// Strip the twin marker.
    pub fn base(&self, code: Code) -> Code {
        if self.is_twin(code) {
            code - self.product_size() as Code
        } else {
            code
        }
    }

    /// (cell, facing, situation) of a product or twin code.
    pub fn parts(&self, code: Code) -> Option<(Cell, Option<Dir>, usize)> {
        if code == self.dead_code() || code as usize > self.dead_code() as usize {
            return None;
        }
        let mut c = self.base(code) as usize;
        let f = c % self.facings;
        c /= self.facings;
        let x = c % self.width;
        c /= self.width;
        let y = c % self.height;
        let sit = c / self.height;
        let facing = (self.facings == 4).then(|| Dir::from_index(f));
        Some(((x, y), facing, sit))
    }

    /// The target's agent cell and facing read in the source's situation.
    ///
    /// Models an estimator that describes a target only by where the agent
    /// stands and takes the rest of the world from the current state.
    pub fn fuse(&self, source: Code, target: Code) -> Option<Code> {
        let (_, _, sit) = self.parts(source)?;
        let (cell, facing, _) = self.parts(target)?;
        let fused = self.with_parts(cell, facing, sit);
        (fused != target).then_some(fused)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parts_round_trip() {
        let c = StateCodec { width: 5, height: 4, facings: 4, situations: 4 };
        for code in 0..c.product_size() as Code {
            let (cell, f, s) = c.parts(code).unwrap();
            assert_eq!(c.with_parts(cell, f, s), code);
            assert_eq!(c.parts(c.twin(code)), Some((cell, f, s)));
        }
        assert_eq!(c.parts(c.dead_code()), None);
    }
}
