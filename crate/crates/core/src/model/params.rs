use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;

/// Affine map `x W + b` with `W` stored as `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Linear {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    fn random(inputs: usize, outputs: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let bound = scale * (6.0 / (inputs + outputs) as f64).sqrt();
        Linear {
            weight: Array2::from_shape_simple_fn((inputs, outputs), || rng.gen_range(-bound..=bound)),
            bias: Array1::zeros(outputs),
        }
    }
}

/// One attention block: multi-head self-attention then a tanh feed-forward,
/// each wrapped in a residual connection.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub ff_in: Linear,
    pub ff_out: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub token_embedding: Array2<f64>,
    pub position_embedding: Array2<f64>,
    pub blocks: Vec<Block>,
    pub pattern_head: Linear,
    pub position_head: Linear,
}

impl Parameters {
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.embed_dim;
        let block = || Block {
            query: Linear::zeros(d, d),
            key: Linear::zeros(d, d),
            value: Linear::zeros(d, d),
            output: Linear::zeros(d, d),
            ff_in: Linear::zeros(d, config.ff_dim),
            ff_out: Linear::zeros(config.ff_dim, d),
        };
        Parameters {
            token_embedding: Array2::zeros((config.vocab_size, d)),
            position_embedding: Array2::zeros((config.max_seq_len, d)),
            blocks: (0..config.attention_layers).map(|_| block()).collect(),
            pattern_head: Linear::zeros(d, config.pattern_classes),
            position_head: Linear::zeros(d, config.position_classes),
        }
    }

    pub fn init(config: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.embed_dim;
        let s = config.init_scale;
        let emb = (3.0 / d as f64).sqrt() * s;
        let embedding =
            |rows: usize, rng: &mut ChaCha8Rng| Array2::from_shape_simple_fn((rows, d), || rng.gen_range(-emb..=emb));
        let token_embedding = embedding(config.vocab_size, &mut rng);
        let position_embedding = embedding(config.max_seq_len, &mut rng);
        let blocks = (0..config.attention_layers)
            .map(|_| Block {
                query: Linear::random(d, d, s, &mut rng),
                key: Linear::random(d, d, s, &mut rng),
                value: Linear::random(d, d, s, &mut rng),
                output: Linear::random(d, d, s, &mut rng),
                ff_in: Linear::random(d, config.ff_dim, s, &mut rng),
                ff_out: Linear::random(config.ff_dim, d, s, &mut rng),
            })
            .collect();
        Parameters {
            token_embedding,
            position_embedding,
            blocks,
            pattern_head: Linear::random(d, config.pattern_classes, s, &mut rng),
            position_head: Linear::random(d, config.position_classes, s, &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Every tensor in a fixed order, flattened row-major.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        fn lin<'a>(out: &mut Vec<(String, &'a [f64])>, name: String, l: &'a Linear) {
            out.push((format!("{name}.weight"), l.weight.as_slice().expect("standard layout")));
            out.push((format!("{name}.bias"), l.bias.as_slice().expect("standard layout")));
        }
        let mut out = vec![
            (
                "token_embedding".to_string(),
                self.token_embedding.as_slice().expect("standard layout"),
            ),
            (
                "position_embedding".to_string(),
                self.position_embedding.as_slice().expect("standard layout"),
            ),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            lin(&mut out, format!("block{i}.query"), &b.query);
            lin(&mut out, format!("block{i}.key"), &b.key);
            lin(&mut out, format!("block{i}.value"), &b.value);
            lin(&mut out, format!("block{i}.output"), &b.output);
            lin(&mut out, format!("block{i}.ff_in"), &b.ff_in);
            lin(&mut out, format!("block{i}.ff_out"), &b.ff_out);
        }
        lin(&mut out, "pattern_head".into(), &self.pattern_head);
        lin(&mut out, "position_head".into(), &self.position_head);
        out
    }

    /// Same order as [`Parameters::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        fn lin<'a>(out: &mut Vec<&'a mut [f64]>, l: &'a mut Linear) {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        let mut out = vec![
            self.token_embedding.as_slice_mut().expect("standard layout"),
            self.position_embedding.as_slice_mut().expect("standard layout"),
        ];
        for b in &mut self.blocks {
            lin(&mut out, &mut b.query);
            lin(&mut out, &mut b.key);
            lin(&mut out, &mut b.value);
            lin(&mut out, &mut b.output);
            lin(&mut out, &mut b.ff_in);
            lin(&mut out, &mut b.ff_out);
        }
        lin(&mut out, &mut self.pattern_head);
        lin(&mut out, &mut self.position_head);
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}
