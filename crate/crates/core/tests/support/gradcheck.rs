#![allow(dead_code)]

//! Every tape op against central finite differences. Shared by the
//! gradcheck tests and the acceptance run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stillbench::nn::{Aggregation, Classifier, ConvSpec, EncoderSpec, TemporalNet, TemporalNetSpec};
use stillbench::tensor::{Tape, Targets, Tensor, Var};
use stillbench::Result;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// Worst relative error seen, or a description of the first failure.
pub type Outcome = std::result::Result<f64, String>;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    // keep clear of relu kinks and max-pool ties
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) { v } else { -v }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Records `f` on fresh tapes and compares the analytic gradient of
/// `sum(f(inputs) * probe)` with central differences.
fn check(name: &str, inputs: &[Tensor], f: impl Fn(&mut Tape, &[Var]) -> Result<Var>, rng: &mut ChaCha8Rng) -> Outcome {
    let scalar_loss = |tape: &mut Tape, vars: &[Var], probe: Option<&Tensor>| -> Var {
        let out = f(tape, vars).unwrap();
        match probe {
            Some(p) => {
                let pv = tape.leaf(p.clone());
                let prod = tape.mul(out, pv).unwrap();
                tape.sum(prod).unwrap()
            }
            None => out,
        }
    };
    let out_shape = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars).unwrap();
        tape.value(out).shape().to_vec()
    };
    let probe = (out_shape.iter().product::<usize>() > 1).then(|| random(&out_shape, rng));
    let eval = |values: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = scalar_loss(&mut tape, &vars, probe.as_ref());
        tape.value(loss).item().unwrap()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = scalar_loss(&mut tape, &vars, probe.as_ref());
    let grads = tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]).expect("gradient for every input");
        assert_eq!(analytic.shape(), input.shape(), "{name}: gradient shape");
        for j in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * STEP);
            let a = analytic.data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            if !(rel < TOLERANCE) {
                return Err(format!("{name}: input {i} element {j}: analytic {a} numeric {numeric} (rel {rel:e})"));
            }
        }
    }
    Ok(worst)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matmul() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut r = rng(1);
    for &(m, k, n) in &[(1, 1, 1), (2, 3, 4), (5, 2, 3)] {
        let ins = [random(&[m, k], &mut r), random(&[k, n], &mut r)];
        worst = worst.max(check("matmul", &ins, |t, v| t.matmul(v[0], v[1]), &mut r)?);
    }
    Ok(worst)
}

pub fn elementwise() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut r = rng(2);
    for shape in [vec![3], vec![2, 3], vec![2, 1, 2, 2]] {
        let ins = [random(&shape, &mut r), random(&shape, &mut r)];
        worst = worst.max(check("add", &ins, |t, v| t.add(v[0], v[1]), &mut r)?);
        worst = worst.max(check("mul", &ins, |t, v| t.mul(v[0], v[1]), &mut r)?);
        worst = worst.max(check("scale", &ins[..1], |t, v| t.scale(v[0], -1.7), &mut r)?);
        worst = worst.max(check("relu", &ins[..1], |t, v| t.relu(v[0]), &mut r)?);
    }
    Ok(worst)
}

pub fn bias_add() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut r = rng(3);
    let ins = [random(&[4, 3], &mut r), random(&[3], &mut r)];
    worst = worst.max(check("bias_add 2d", &ins, |t, v| t.bias_add(v[0], v[1]), &mut r)?);
    let ins = [random(&[2, 3, 2, 2], &mut r), random(&[3], &mut r)];
    worst = worst.max(check("bias_add 4d", &ins, |t, v| t.bias_add(v[0], v[1]), &mut r)?);
    Ok(worst)
}

pub fn conv2d() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut r = rng(4);
    for &(n, c, h, w, f, k, stride, pad) in &[
        (1, 1, 3, 3, 1, 3, 1, 1),
        (2, 2, 5, 4, 3, 3, 1, 1),
        (1, 3, 6, 6, 2, 3, 2, 1),
        (2, 2, 4, 5, 2, 1, 1, 0),
    ] {
        let ins = [random(&[n, c, h, w], &mut r), random(&[f, c, k, k], &mut r)];
        worst = worst.max(check("conv2d", &ins, move |t, v| t.conv2d(v[0], v[1], stride, pad), &mut r)?);
    }
    Ok(worst)
}

pub fn pooling_and_shapes() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut r = rng(5);
    let ins = [random(&[2, 2, 4, 6], &mut r)];
    worst = worst.max(check("max_pool2", &ins, |t, v| t.max_pool2(v[0]), &mut r)?);
    let ins = [random(&[2, 2, 5, 5], &mut r)];
    worst = worst.max(check("max_pool2 odd", &ins, |t, v| t.max_pool2(v[0]), &mut r)?);
    let ins = [random(&[2, 3, 2], &mut r)];
    worst = worst.max(check("reshape", &ins, |t, v| t.reshape(v[0], &[3, 4]), &mut r)?);
    worst = worst.max(check("flatten", &ins, |t, v| t.flatten(v[0]), &mut r)?);
    worst = worst.max(check("sum", &ins, |t, v| t.sum(v[0]), &mut r)?);
    worst = worst.max(check("mean", &ins, |t, v| t.mean(v[0]), &mut r)?);
    for axis in 0..3 {
        worst = worst.max(check("mean_axis", &ins, move |t, v| t.mean_axis(v[0], axis), &mut r)?);
    }
    Ok(worst)
}

pub fn cross_entropy() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut r = rng(6);
    let ins = [random(&[4, 3], &mut r)];
    worst = worst.max(check("ce classes", &ins, |t, v| t.softmax_cross_entropy(v[0], Targets::Classes(&[0, 2, 1, 2])), &mut r)?);
    let mix = Tensor::new(&[2, 3], vec![0.25, 0.75, 0.0, 0.1, 0.3, 0.6]).unwrap();
    let ins = [random(&[2, 3], &mut r)];
    worst = worst.max(check("ce mixture", &ins, |t, v| t.softmax_cross_entropy(v[0], Targets::Mixture(&mix)), &mut r)?);
    Ok(worst)
}

pub fn temporal_shift() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut r = rng(7);
    for &(clips, frames, c, fraction) in &[(1, 3, 8, 0.125), (2, 4, 4, 0.25), (1, 1, 8, 0.25), (2, 2, 6, 0.5)] {
        let ins = [random(&[clips * frames, c, 2, 2], &mut r)];
        worst = worst.max(check("temporal_shift", &ins, move |t, v| t.temporal_shift(v[0], frames, fraction), &mut r)?);
    }
    Ok(worst)
}

pub fn video_forward_micro_clip() -> Outcome {
    let spec = TemporalNetSpec {
        encoder: EncoderSpec {
            convs: vec![ConvSpec::new(4, 3, 1, true), ConvSpec::new(4, 3, 1, false)],
            global_pool: false,
            hidden: 5,
        },
        aggregation: Aggregation::Shift,
        shift_fraction: 0.25,
    };
    let (c, t, h, w) = (3, 3, 4, 4);
    let mut net = TemporalNet::new(spec, (c, t, h, w), 3, 11).unwrap();
    let mut r = rng(8);
    // the head starts at zero; give it values so every path carries gradient
    for p in net.params_mut() {
        if p.name.starts_with("head") {
            p.value = random(p.value.shape(), &mut r);
        }
    }
    let clips = random(&[2, c, t, h, w], &mut r).map(|v| v.abs());
    let params: Vec<Tensor> = net.params().iter().map(|p| p.value.clone()).collect();
    let names: Vec<String> = net.params().iter().map(|p| p.name.clone()).collect();
    let loss_of = |values: &[Tensor]| -> f64 {
        let mut n = net.clone();
        for (p, v) in n.params_mut().iter_mut().zip(values) {
            p.value = v.clone();
        }
        let mut tape = Tape::new();
        let (logits, _) = n.record(&mut tape, clips.clone(), false).unwrap();
        let loss = tape.softmax_cross_entropy(logits, Targets::Classes(&[1, 2])).unwrap();
        tape.value(loss).item().unwrap()
    };
    let mut tape = Tape::new();
    let (logits, vars) = net.record(&mut tape, clips.clone(), true).unwrap();
    let loss = tape.softmax_cross_entropy(logits, Targets::Classes(&[1, 2])).unwrap();
    let grads = tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (i, name) in names.iter().enumerate() {
        let analytic = grads.get(vars[i]).expect("parameter gradient");
        for j in 0..params[i].len() {
            let mut plus = params.clone();
            plus[i].data_mut()[j] += STEP;
            let mut minus = params.clone();
            minus[i].data_mut()[j] -= STEP;
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * STEP);
            let a = analytic.data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            if !(rel < TOLERANCE) {
                return Err(format!("{name}[{j}]: analytic {a} numeric {numeric} (rel {rel:e})"));
            }
        }
    }
    Ok(worst)
}

pub const CASES: [(&str, fn() -> Outcome); 8] = [
    ("matmul", matmul),
    ("elementwise", elementwise),
    ("bias_add", bias_add),
    ("conv2d", conv2d),
    ("pooling_and_shapes", pooling_and_shapes),
    ("cross_entropy", cross_entropy),
    ("temporal_shift", temporal_shift),
    ("video_forward_micro_clip", video_forward_micro_clip),
];
