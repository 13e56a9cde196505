use std::sync::Arc;

use ndarray::{s, Array2, Array4, ArrayView2, ArrayView3, Zip};

use super::layer::{LayerGrad, LayerTape, Pointwise, PointwiseGrad, PreparedLayer, Spectral};
use super::params::kernel_shape;
use super::{Integrator, ModelConfig, ModelParams, ParamLayout};
use crate::error::{Error, Result};
use crate::kernel::{materialize_slice, KernelShape};
use crate::tensor::{check_modes, Field};

/// Butcher tableau of an explicit scheme.
struct Tableau {
    a: &'static [&'static [f64]],
    b: &'static [f64],
}

const EULER: Tableau = Tableau { a: &[&[]], b: &[1.0] };
// Kutta's third-order method.
const RK3: Tableau = Tableau { a: &[&[], &[0.5], &[-1.0, 2.0]], b: &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0] };

fn tableau(integrator: Integrator) -> &'static Tableau {
    match integrator {
        Integrator::Euler => &EULER,
        Integrator::Rk3 => &RK3,
    }
}

/// One explicit update `u -> u + dt * sum(b_s k_s)` with an arbitrary
/// right-hand side. The model's own [`Prepared::step`] uses the same
/// coefficients; this entry point lets analytic right-hand sides stand in for
/// the learned one.
pub fn explicit_step<F>(u: &Field, dt: f64, integrator: Integrator, mut rhs: F) -> Result<Field>
where
    F: FnMut(&Field) -> Result<Field>,
{
    let tab = tableau(integrator);
    let mut ks: Vec<Field> = Vec::with_capacity(tab.b.len());
    for row in tab.a {
        let mut y = u.clone();
        for (k, &a) in ks.iter().zip(row.iter()) {
            y.data.scaled_add(dt * a, &k.data);
        }
        ks.push(rhs(&y)?);
    }
    let mut out = u.clone();
    for (k, &b) in ks.iter().zip(tab.b) {
        out.data.scaled_add(dt * b, &k.data);
    }
    out.ensure_finite("time step")?;
    Ok(out)
}

/// Parameters expanded into the matrices the forward pass consumes. Built
/// once per parameter update and shared by every sample and tape.
#[derive(Debug)]
pub struct Prepared {
    config: ModelConfig,
    layout: ParamLayout,
    kshape: KernelShape,
    lift: Pointwise,
    layers: Vec<PreparedLayer>,
    dec1: Pointwise,
    dec2: Pointwise,
}

#[derive(Debug)]
struct SampleTape {
    input: Array2<f64>,
    layers: Vec<LayerTape>,
    feats: Vec<Array2<f64>>,
    fused_mean: Array2<f64>,
    hidden_pre: Array2<f64>,
}

#[derive(Debug)]
struct FhatRecord {
    samples: Vec<SampleTape>,
    in_channels: usize,
    h: usize,
    w: usize,
    dx: f64,
    dy: f64,
}

#[derive(Debug)]
enum TapeState {
    Empty,
    Fhat(Arc<Prepared>, FhatRecord),
    Step { prepared: Arc<Prepared>, stages: Vec<FhatRecord>, dt: f64, integrator: Integrator },
    Consumed,
}

/// Forward intermediates for exactly one reverse pass.
#[derive(Debug)]
pub struct Tape {
    state: TapeState,
}

impl Default for Tape {
    fn default() -> Self {
        Tape { state: TapeState::Empty }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn is_recorded(&self) -> bool {
        matches!(self.state, TapeState::Fhat(..) | TapeState::Step { .. })
    }
}

/// Reverse-mode result: gradient over the flat parameter vector (same layout
/// as [`ModelParams::values`]) and over the forward input.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Field,
}

struct GradAcc {
    lift: PointwiseGrad,
    layers: Vec<LayerGrad>,
    dec1: PointwiseGrad,
    dec2: PointwiseGrad,
}

impl Prepared {
    pub fn new(config: &ModelConfig, params: &ModelParams) -> Result<Arc<Prepared>> {
        config.validate()?;
        let layout = ParamLayout::for_config(config);
        if layout != params.layout {
            return Err(Error::shape("parameter layout does not match model config"));
        }
        let (dz, g) = (config.latent, config.groups);
        let kshape = kernel_shape(config);
        let lift = Pointwise::dense(params.segment("lift.weight"), params.segment("lift.bias"), dz, config.in_channels);
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let k = materialize_slice(&kshape, params.segment(&format!("layer{l}.kernel")))?;
            let pw = |part: &str| {
                Pointwise::group(
                    params.segment(&format!("layer{l}.{part}.weight")),
                    params.segment(&format!("layer{l}.{part}.bias")),
                    dz,
                    dz,
                    g,
                )
            };
            layers.push(PreparedLayer {
                spectral: Spectral::from_kernel(&k)?,
                residual: pw("residual"),
                mlp1: pw("mlp1"),
                mlp2: pw("mlp2"),
            });
        }
        let dec1 = Pointwise::dense(params.segment("decoder1.weight"), params.segment("decoder1.bias"), config.decoder_hidden, dz);
        let dec2 = Pointwise::dense(
            params.segment("decoder2.weight"),
            params.segment("decoder2.bias"),
            config.out_channels,
            config.decoder_hidden,
        );
        Ok(Arc::new(Prepared { config: config.clone(), layout, kshape, lift, layers, dec1, dec2 }))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn zero_grad(&self) -> GradAcc {
        GradAcc {
            lift: self.lift.zero_grad(),
            layers: self.layers.iter().map(|l| l.zero_grad()).collect(),
            dec1: self.dec1.zero_grad(),
            dec2: self.dec2.zero_grad(),
        }
    }

    fn fold(&self, acc: &GradAcc) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.layout.len()];
        let (dz, g) = (self.config.latent, self.config.groups);
        let (w, b) = split2(&mut out, self.layout.range("lift.weight"), self.layout.range("lift.bias"));
        acc.lift.fold_dense(w, b);
        for (l, lg) in acc.layers.iter().enumerate() {
            Spectral::fold(&lg.spectral, &self.kshape, &mut out[self.layout.range(&format!("layer{l}.kernel"))])?;
            for (part, pg) in [("residual", &lg.residual), ("mlp1", &lg.mlp1), ("mlp2", &lg.mlp2)] {
                let (w, b) = split2(
                    &mut out,
                    self.layout.range(&format!("layer{l}.{part}.weight")),
                    self.layout.range(&format!("layer{l}.{part}.bias")),
                );
                pg.fold_group(w, b, dz, dz, g);
            }
        }
        let (w, b) = split2(&mut out, self.layout.range("decoder1.weight"), self.layout.range("decoder1.bias"));
        acc.dec1.fold_dense(w, b);
        let (w, b) = split2(&mut out, self.layout.range("decoder2.weight"), self.layout.range("decoder2.bias"));
        acc.dec2.fold_dense(w, b);
        Ok(out)
    }

    fn padded(&self, h: usize, w: usize) -> (usize, usize) {
        (h + 2 * self.config.pad, w + 2 * self.config.pad)
    }

    fn check_input(&self, u: &Field, channels: usize) -> Result<()> {
        let (_, c, h, w) = u.shape();
        if c != channels {
            return Err(Error::shape(format!("expected {channels} input channels, got {c}")));
        }
        let (hp, wp) = self.padded(h, w);
        check_modes(self.config.modes, hp, wp)
    }

    fn sample_forward(&self, u: ArrayView3<'_, f64>) -> Result<(Array2<f64>, SampleTape)> {
        let cfg = &self.config;
        let (cin, h, w) = u.dim();
        let (hp, wp) = self.padded(h, w);
        let g_n = cfg.groups;
        let input = u.to_owned().into_shape_with_order((cin, h * w)).expect("contiguous");
        let lifted = self.lift.forward(input.view());

        let mut f = Array2::zeros((cfg.latent_channels(), hp * wp));
        for (c, row) in lifted.outer_iter().enumerate() {
            for g in 0..g_n {
                embed(row.view(), f.row_mut(c * g_n + g), h, w, cfg.pad);
            }
        }

        let mut layers = Vec::with_capacity(cfg.layers);
        let mut feats = Vec::with_capacity(cfg.layers);
        for layer in &self.layers {
            let (out, tape) = layer.forward(cfg.activation, f, hp, wp)?;
            let mut k = crop(out.view(), h, w, cfg.pad);
            if cfg.fusion_scale != 1.0 {
                k.mapv_inplace(|v| v * cfg.fusion_scale);
            }
            feats.push(k);
            layers.push(tape);
            f = out;
        }

        let mut fused = feats[0].clone();
        for k in &feats[1..] {
            fused *= k;
        }
        if !fused.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("product fusion".into()));
        }
        let mut fused_mean = Array2::zeros((cfg.latent, h * w));
        for (c, mut row) in fused_mean.outer_iter_mut().enumerate() {
            for g in 0..g_n {
                row += &fused.row(c * g_n + g);
            }
            row /= g_n as f64;
        }
        let hidden_pre = self.dec1.forward(fused_mean.view());
        let hidden = hidden_pre.mapv(|v| cfg.activation.apply(v));
        let out = self.dec2.forward(hidden.view());
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("decoder output".into()));
        }
        Ok((out, SampleTape { input, layers, feats, fused_mean, hidden_pre }))
    }

    fn sample_backward(&self, tape: &SampleTape, gy: ArrayView2<'_, f64>, h: usize, w: usize, acc: &mut GradAcc) -> Array2<f64> {
        let cfg = &self.config;
        let g_n = cfg.groups;
        let (hp, wp) = self.padded(h, w);
        let hidden = tape.hidden_pre.mapv(|v| cfg.activation.apply(v));
        let mut g_hidden = self.dec2.backward(hidden.view(), gy, &mut acc.dec2);
        Zip::from(&mut g_hidden).and(&tape.hidden_pre).for_each(|g, &a| *g *= cfg.activation.derivative(a));
        let g_mean = self.dec1.backward(tape.fused_mean.view(), g_hidden.view(), &mut acc.dec1);

        let mut g_fused = Array2::zeros((cfg.latent_channels(), h * w));
        for (c, row) in g_mean.outer_iter().enumerate() {
            for g in 0..g_n {
                g_fused.row_mut(c * g_n + g).assign(&(&row / g_n as f64));
            }
        }

        // d/dK_l of prod_j K_j via prefix and suffix products
        let n_l = tape.feats.len();
        let mut prefix = Vec::with_capacity(n_l);
        let mut run = Array2::<f64>::ones(g_fused.dim());
        for k in &tape.feats {
            prefix.push(run.clone());
            run *= k;
        }
        let mut suffix = Array2::<f64>::ones(g_fused.dim());
        let mut g_feats = vec![Array2::zeros((0, 0)); n_l];
        for l in (0..n_l).rev() {
            let mut g = &g_fused * &prefix[l] * &suffix;
            if cfg.fusion_scale != 1.0 {
                g.mapv_inplace(|v| v * cfg.fusion_scale);
            }
            g_feats[l] = g;
            suffix *= &tape.feats[l];
        }

        let mut g_next: Option<Array2<f64>> = None;
        for l in (0..n_l).rev() {
            let mut gout = Array2::zeros((cfg.latent_channels(), hp * wp));
            for (c, row) in g_feats[l].outer_iter().enumerate() {
                embed(row, gout.row_mut(c), h, w, cfg.pad);
            }
            if let Some(gn) = g_next.take() {
                gout += &gn;
            }
            let gin = self.layers[l].backward(cfg.activation, &tape.layers[l], gout.view(), hp, wp, &mut acc.layers[l]);
            g_next = Some(gin);
        }
        let g_f0 = g_next.expect("at least one layer");
        let g_interior = crop(g_f0.view(), h, w, cfg.pad);
        let mut g_lift = Array2::zeros((cfg.latent, h * w));
        for (c, mut row) in g_lift.outer_iter_mut().enumerate() {
            for g in 0..g_n {
                row += &g_interior.row(c * g_n + g);
            }
        }
        self.lift.backward(tape.input.view(), g_lift.view(), &mut acc.lift)
    }

    fn fhat_record(&self, u: &Field) -> Result<(Field, FhatRecord)> {
        self.check_input(u, self.config.in_channels)?;
        let (b, cin, h, w) = u.shape();
        let mut out = Array4::zeros((b, self.config.out_channels, h, w));
        let mut samples = Vec::with_capacity(b);
        for i in 0..b {
            let (y, tape) = self.sample_forward(u.sample(i))?;
            out.slice_mut(s![i, .., .., ..])
                .assign(&y.into_shape_with_order((self.config.out_channels, h, w)).expect("shape"));
            samples.push(tape);
        }
        let rec = FhatRecord { samples, in_channels: cin, h, w, dx: u.dx, dy: u.dy };
        Ok((Field::with_spacing(out, u.dx, u.dy), rec))
    }

    fn fhat_backward(&self, rec: &FhatRecord, g: &Field, acc: &mut GradAcc) -> Result<Field> {
        let (h, w) = (rec.h, rec.w);
        if g.shape() != (rec.samples.len(), self.config.out_channels, h, w) {
            return Err(Error::shape(format!("cotangent shape {:?} does not match forward output", g.shape())));
        }
        let mut gin = Array4::zeros((rec.samples.len(), rec.in_channels, h, w));
        for (i, tape) in rec.samples.iter().enumerate() {
            let gy = g.sample(i).to_owned().into_shape_with_order((self.config.out_channels, h * w)).expect("contiguous");
            let gu = self.sample_backward(tape, gy.view(), h, w, acc);
            gin.slice_mut(s![i, .., .., ..])
                .assign(&gu.into_shape_with_order((rec.in_channels, h, w)).expect("shape"));
        }
        Ok(Field::with_spacing(gin, rec.dx, rec.dy))
    }

    /// Learned right-hand side: lift, MC-Fourier stack, product fusion over
    /// depths, group average, decoder.
    pub fn fhat_forward(self: &Arc<Self>, u: &Field, tape: &mut Tape) -> Result<Field> {
        let (out, rec) = self.fhat_record(u)?;
        tape.state = TapeState::Fhat(Arc::clone(self), rec);
        Ok(out)
    }

    pub fn fhat(&self, u: &Field) -> Result<Field> {
        self.fhat_record(u).map(|(out, _)| out)
    }

    /// One explicit time step of the configured integrator.
    pub fn step(self: &Arc<Self>, u: &Field, tape: &mut Tape) -> Result<Field> {
        if self.config.in_channels != self.config.out_channels {
            return Err(Error::shape("time stepping needs in_channels == out_channels"));
        }
        let mut stages = Vec::new();
        let out = explicit_step(u, self.config.dt, self.config.integrator, |y| {
            let (k, rec) = self.fhat_record(y)?;
            stages.push(rec);
            Ok(k)
        })?;
        tape.state = TapeState::Step {
            prepared: Arc::clone(self),
            stages,
            dt: self.config.dt,
            integrator: self.config.integrator,
        };
        Ok(out)
    }

    /// Forward step without keeping intermediates.
    pub fn predict(&self, u: &Field) -> Result<Field> {
        if self.config.in_channels != self.config.out_channels {
            return Err(Error::shape("time stepping needs in_channels == out_channels"));
        }
        explicit_step(u, self.config.dt, self.config.integrator, |y| self.fhat(y))
    }

    /// Layer `l` applied to a latent field (`latent * groups` channels, group
    /// index fastest) on its own grid, without padding.
    pub fn mc_fourier_layer(&self, f: &Field, l: usize) -> Result<Field> {
        let layer = self.layers.get(l).ok_or_else(|| Error::shape(format!("no layer {l}")))?;
        let (b, c, h, w) = f.shape();
        if c != self.config.latent_channels() {
            return Err(Error::shape(format!("layer expects {} channels, got {c}", self.config.latent_channels())));
        }
        check_modes(self.config.modes, h, w)?;
        let mut out = Array4::zeros((b, c, h, w));
        for i in 0..b {
            let x = f.sample(i).to_owned().into_shape_with_order((c, h * w)).expect("contiguous");
            let (y, _) = layer.forward(self.config.activation, x, h, w)?;
            out.slice_mut(s![i, .., .., ..]).assign(&y.into_shape_with_order((c, h, w)).expect("shape"));
        }
        Ok(Field::with_spacing(out, f.dx, f.dy))
    }
}

/// Reverse pass over a recorded forward. A tape supports one call; a second
/// call fails with [`Error::TapeConsumed`].
pub fn backward(tape: &mut Tape, grad_out: &Field) -> Result<Gradients> {
    let state = std::mem::replace(&mut tape.state, TapeState::Consumed);
    match state {
        TapeState::Empty | TapeState::Consumed => Err(Error::TapeConsumed),
        TapeState::Fhat(prepared, rec) => {
            let mut acc = prepared.zero_grad();
            let input = prepared.fhat_backward(&rec, grad_out, &mut acc)?;
            Ok(Gradients { params: prepared.fold(&acc)?, input })
        }
        TapeState::Step { prepared, stages, dt, integrator } => {
            let tab = tableau(integrator);
            let mut acc = prepared.zero_grad();
            let mut g_u = grad_out.clone();
            let mut g_k: Vec<Field> = tab
                .b
                .iter()
                .map(|&b| {
                    let mut g = grad_out.clone();
                    g.data.mapv_inplace(|v| v * dt * b);
                    g
                })
                .collect();
            for s in (0..stages.len()).rev() {
                let g_y = prepared.fhat_backward(&stages[s], &g_k[s], &mut acc)?;
                g_u.data += &g_y.data;
                for (j, &a) in tab.a[s].iter().enumerate() {
                    g_k[j].data.scaled_add(dt * a, &g_y.data);
                }
            }
            Ok(Gradients { params: prepared.fold(&acc)?, input: g_u })
        }
    }
}

fn split2(v: &mut [f64], a: std::ops::Range<usize>, b: std::ops::Range<usize>) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a.end <= b.start);
    let (lo, hi) = v.split_at_mut(b.start);
    (&mut lo[a], &mut hi[..b.end - b.start])
}

/// Writes an `h x w` plane into the interior of a padded plane.
fn embed(src: ndarray::ArrayView1<'_, f64>, mut dst: ndarray::ArrayViewMut1<'_, f64>, h: usize, w: usize, pad: usize) {
    let wp = w + 2 * pad;
    for y in 0..h {
        for x in 0..w {
            dst[(y + pad) * wp + x + pad] = src[y * w + x];
        }
    }
}

/// Interior `h x w` region of every padded channel.
fn crop(src: ArrayView2<'_, f64>, h: usize, w: usize, pad: usize) -> Array2<f64> {
    if pad == 0 {
        return src.to_owned();
    }
    let wp = w + 2 * pad;
    Array2::from_shape_fn((src.nrows(), h * w), |(c, p)| src[[c, (p / w + pad) * wp + p % w + pad]])
}

/// A PeFNN: configuration plus weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let params = ModelParams::init(&config, seed);
        Ok(Model { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ModelParams) -> Result<Model> {
        config.validate()?;
        if ParamLayout::for_config(&config) != params.layout {
            return Err(Error::shape("parameter layout does not match model config"));
        }
        Ok(Model { config, params })
    }

    pub fn prepare(&self) -> Result<Arc<Prepared>> {
        Prepared::new(&self.config, &self.params)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn fhat_forward(&self, u: &Field, tape: &mut Tape) -> Result<Field> {
        self.prepare()?.fhat_forward(u, tape)
    }

    pub fn fhat(&self, u: &Field) -> Result<Field> {
        self.prepare()?.fhat(u)
    }

    pub fn step(&self, u: &Field, tape: &mut Tape) -> Result<Field> {
        self.prepare()?.step(u, tape)
    }

    pub fn predict(&self, u: &Field) -> Result<Field> {
        self.prepare()?.predict(u)
    }

    pub fn mc_fourier_layer(&self, f: &Field, l: usize) -> Result<Field> {
        self.prepare()?.mc_fourier_layer(f, l)
    }
}
