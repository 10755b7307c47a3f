use gcarl_core::diffnet::{Layer, LayerKind, LayerSpec, Network};
use serde::{Deserialize, Serialize};

use super::{check_version, decode_len, encode_f64s};

pub const NETWORK_VERSION: &str = "diffnet/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub version: String,
    pub layers: Vec<LayerEntry>,
}

/// `kind` is one of `affine`, `maxout`, `leaky_relu`, `tanh`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    pub kind: String,
    pub in_dim: usize,
    pub out_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    pub weights: String,
    pub biases: String,
}

impl NetworkFile {
    pub fn from_network(net: &Network) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| {
                let (kind, pieces, slope) = match l.spec.kind {
                    LayerKind::Affine => ("affine", None, None),
                    LayerKind::Maxout { pieces } => ("maxout", Some(pieces), None),
                    LayerKind::LeakyRelu { slope } => ("leaky_relu", None, Some(slope)),
                    LayerKind::Tanh => ("tanh", None, None),
                };
                LayerEntry {
                    kind: kind.into(),
                    in_dim: l.spec.in_dim,
                    out_dim: l.spec.out_dim,
                    pieces,
                    slope,
                    weights: encode_f64s(&l.weights),
                    biases: encode_f64s(&l.biases),
                }
            })
            .collect();
        Self { version: NETWORK_VERSION.into(), layers }
    }

    pub fn to_network(&self) -> Result<Network, String> {
        check_version(&self.version, NETWORK_VERSION)?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, e) in self.layers.iter().enumerate() {
            let kind = match (e.kind.as_str(), e.pieces, e.slope) {
                ("affine", None, None) => LayerKind::Affine,
                ("maxout", Some(pieces), None) => LayerKind::Maxout { pieces },
                ("leaky_relu", None, Some(slope)) => LayerKind::LeakyRelu { slope },
                ("tanh", None, None) => LayerKind::Tanh,
                _ => return Err(format!("layer {i}: unknown kind {:?} or misplaced pieces/slope", e.kind)),
            };
            let spec = LayerSpec { kind, in_dim: e.in_dim, out_dim: e.out_dim };
            let weights = decode_len(&e.weights, spec.weight_len(), &format!("layer {i} weights"))?;
            let biases = decode_len(&e.biases, spec.bias_len(), &format!("layer {i} biases"))?;
            layers.push(Layer { spec, weights, biases });
        }
        Network::from_layers(layers).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gcarl_core::diffnet::build_network;

    #[test]
    fn every_layer_kind_round_trips() {
        let specs = [
            LayerSpec::maxout(3, 4, 2),
            LayerSpec::leaky_relu(4, 0.2),
            LayerSpec::affine(4, 5),
            LayerSpec::tanh(5),
            LayerSpec::affine(5, 2),
        ];
        let net = build_network(&specs, 7).unwrap();
        let file = NetworkFile::from_network(&net);
        let text = serde_json::to_string(&file).unwrap();
        let back: NetworkFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_network().unwrap(), net);
    }

    #[test]
    fn wrong_version_or_length_rejected() {
        let net = build_network(&[LayerSpec::affine(2, 2)], 0).unwrap();
        let mut file = NetworkFile::from_network(&net);
        file.version = "diffnet/0".into();
        assert!(file.to_network().is_err());
        let mut file = NetworkFile::from_network(&net);
        file.layers[0].in_dim = 3;
        assert!(file.to_network().is_err());
    }
}
