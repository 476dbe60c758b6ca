use crate::nn::{Activation, Graph, GraphBuilder, NodeId, Op, Padding, RngState, Scalar};

use super::{ModelConfig, ModelKind};

/// Join columns of each fractal block.
const FRACTAL_COLUMNS: usize = 3;
const FRACTAL_WIDTHS: [usize; 5] = [8, 10, 12, 14, 16];

pub(super) fn build<T: Scalar>(
    kind: ModelKind,
    config: ModelConfig,
    rng: &mut RngState,
) -> Graph<T> {
    let mut bp = Blueprint {
        b: GraphBuilder::new(config.in_channels, config.input_len, rng),
        config,
    };
    let trunk = match kind {
        ModelKind::M1Residual => bp.residual(),
        ModelKind::M2Fractal => bp.fractal(),
        ModelKind::M3ResNet18 => bp.resnet(),
        ModelKind::M4WaveNetCausal => bp.wavenet(Padding::Causal, false),
        ModelKind::M5WaveNetSame => bp.wavenet(Padding::Same, true),
    };
    let hidden: &[usize] = match kind {
        ModelKind::M1Residual => &[150],
        ModelKind::M2Fractal => &[500, 150],
        ModelKind::M3ResNet18 => &[500, 500],
        ModelKind::M4WaveNetCausal | ModelKind::M5WaveNetSame => &[500, 250],
    };
    bp.head(trunk, hidden);
    bp.b.finish()
}

struct Blueprint<T> {
    b: GraphBuilder<T>,
    config: ModelConfig,
}

impl<T: Scalar> Blueprint<T> {
    fn kernel(&self, k: usize) -> usize {
        k.min((self.config.input_len / 2).max(1))
    }

    /// `conv → BN → ReLU`.
    fn conv_bn_relu(
        &mut self,
        name: &str,
        x: NodeId,
        ch: usize,
        k: usize,
        padding: Padding,
    ) -> NodeId {
        let c = self
            .b
            .conv_for_norm(&format!("{name}.conv"), x, ch, k, padding, 1);
        let n = self.b.batch_norm(&format!("{name}.bn"), c);
        self.b.relu(&format!("{name}.relu"), n)
    }

    fn head(&mut self, trunk: NodeId, hidden: &[usize]) {
        let mut x = self.b.flatten("flatten", trunk);
        for (i, &h) in hidden.iter().enumerate() {
            x = self
                .b
                .dense(&format!("fc{}", i + 1), x, h, Activation::Tanh);
        }
        let logits = self.b.dense("logits", x, 2, Activation::None);
        self.b.softmax("softmax", logits);
    }

    fn residual(&mut self) -> NodeId {
        let k51 = self.kernel(51);
        let k25 = self.kernel(25);
        let a = self.conv_bn_relu("a", 0, 16, k51, Padding::Valid);
        let mut x = self.b.max_pool("a.pool", a, 2);
        for i in 1..=5 {
            let c1 = self
                .b
                .conv(&format!("res{i}.conv1"), x, 16, k25, Padding::Same, 1);
            let r = self.b.relu(&format!("res{i}.relu"), c1);
            let c2 = self
                .b
                .conv(&format!("res{i}.conv2"), r, 16, k25, Padding::Same, 1);
            x = self.b.merge(&format!("res{i}.add"), Op::Add, vec![x, c2]);
        }
        self.b.max_pool("head.pool", x, 2)
    }

    fn fractal(&mut self) -> NodeId {
        let mut x = 0;
        for (i, &ch) in FRACTAL_WIDTHS.iter().enumerate() {
            let k = self.kernel(if i == 0 { 51 } else { 25 });
            let name = format!("f{}", i + 1);
            x = self.fractal_block(&name, x, ch, k, FRACTAL_COLUMNS);
            x = self.b.max_pool(&format!("{name}.pool"), x, 2);
        }
        x
    }

    /// `f_1 = unit`, `f_c(z) = mean(f_{c−1}(f_{c−1}(z)), unit(z))`.
    fn fractal_block(
        &mut self,
        name: &str,
        z: NodeId,
        ch: usize,
        k: usize,
        columns: usize,
    ) -> NodeId {
        if columns == 1 {
            let u = self.conv_bn_relu(name, z, ch, k, Padding::Same);
            return self.b.dropout(&format!("{name}.drop"), u, 0.2);
        }
        let deep = self.fractal_block(&format!("{name}.a"), z, ch, k, columns - 1);
        let deep = self.fractal_block(&format!("{name}.b"), deep, ch, k, columns - 1);
        let short = self.fractal_block(&format!("{name}.s"), z, ch, k, 1);
        self.b
            .merge(&format!("{name}.join"), Op::Mean, vec![deep, short])
    }

    fn resnet(&mut self) -> NodeId {
        let k51 = self.kernel(51);
        let k25 = self.kernel(25);
        let a = self.conv_bn_relu("a", 0, 16, k51, Padding::Same);
        let mut x = self.b.max_pool("a.pool", a, 3);
        for i in 1..=8 {
            let p = format!("b{i}");
            let h = self.conv_bn_relu(&format!("{p}.1"), x, 16, 1, Padding::Same);
            let h = self.conv_bn_relu(&format!("{p}.2"), h, 16, k25, Padding::Same);
            let h = self
                .b
                .conv_for_norm(&format!("{p}.3.conv"), h, 64, 1, Padding::Same, 1);
            let h = self.b.batch_norm(&format!("{p}.3.bn"), h);
            let shortcut = if self.b.channels(x) == 64 {
                x
            } else {
                let s = self
                    .b
                    .conv_for_norm(&format!("{p}.proj.conv"), x, 64, 1, Padding::Same, 1);
                self.b.batch_norm(&format!("{p}.proj.bn"), s)
            };
            let sum = self
                .b
                .merge(&format!("{p}.add"), Op::Add, vec![shortcut, h]);
            x = self.b.relu(&format!("{p}.relu"), sum);
        }
        let x = self.b.max_pool("head.pool", x, 2);
        self.b.dropout("head.drop", x, 0.5)
    }

    /// Dilation rates `2^i`, `i = 0..8`, keeping those shorter than the stack.
    fn dilations(stack_len: usize) -> Vec<usize> {
        (0..9)
            .map(|i| 1usize << i)
            .filter(|&d| d < stack_len.max(2))
            .collect()
    }

    fn wavenet(&mut self, padding: Padding, shared: bool) -> NodeId {
        let k51 = self.kernel(51);
        let a = self.b.conv("a.conv", 0, 16, k51, Padding::Causal, 1);
        let mut x = self.b.max_pool("a.pool", a, 2);
        let rates = Self::dilations(self.b.length(x));
        let mut skips = Vec::with_capacity(rates.len());
        for (i, &d) in rates.iter().enumerate() {
            let p = format!("w{i}");
            let gated = if shared {
                let z = self
                    .b
                    .conv_for_norm(&format!("{p}.conv"), x, 16, 2, padding, d);
                let z = self.b.batch_norm(&format!("{p}.bn"), z);
                self.b.merge(&format!("{p}.gated"), Op::Gated, vec![z, z])
            } else {
                let f = self
                    .b
                    .conv_for_norm(&format!("{p}.filter"), x, 16, 2, padding, d);
                let f = self.b.batch_norm(&format!("{p}.filter_bn"), f);
                let g = self
                    .b
                    .conv_for_norm(&format!("{p}.gate"), x, 16, 2, padding, d);
                let g = self.b.batch_norm(&format!("{p}.gate_bn"), g);
                self.b.merge(&format!("{p}.gated"), Op::Gated, vec![f, g])
            };
            let s = self
                .b
                .conv(&format!("{p}.out"), gated, 16, 1, Padding::Same, 1);
            skips.push(s);
            // The last block's residual output would feed nothing.
            if i + 1 < rates.len() {
                x = self.b.merge(&format!("{p}.res"), Op::Add, vec![x, s]);
            }
        }
        let sum = self.b.merge("skip_sum", Op::Add, skips);
        let r = self.b.relu("head.relu", sum);
        let c = self.b.conv("head.conv", r, 16, 1, Padding::Same, 1);
        let p = self.b.avg_pool("head.pool", c, 2);
        self.b.dropout("head.drop", p, 0.5)
    }
}
