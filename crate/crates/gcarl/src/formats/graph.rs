use gcarl_core::graphs::{Generator, GroupedGraph};
use gcarl_core::{GroupLayout, Matrix};
use serde::{Deserialize, Serialize};

use super::check_version;

pub const GRAPH_VERSION: &str = "gcarl-graph/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub version: String,
    #[serde(rename = "M")]
    pub groups: usize,
    pub dims: Vec<usize>,
    /// Row-major `D × D`; entry `a·D + b` is the weight of `a → b`.
    pub adjacency: Vec<f64>,
    pub confounder_mask: Vec<bool>,
    pub metadata: GraphMetadata,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphMetadata {
    pub generator: String,
    pub seed: u64,
}

impl GraphFile {
    pub fn from_graph(g: &GroupedGraph) -> Self {
        Self {
            version: GRAPH_VERSION.into(),
            groups: g.num_groups(),
            dims: g.layout().dims().to_vec(),
            adjacency: g.adjacency().as_slice().to_vec(),
            confounder_mask: g.confounder_mask().to_vec(),
            metadata: GraphMetadata { generator: g.meta.generator.name().into(), seed: g.meta.seed },
        }
    }

    pub fn to_graph(&self) -> Result<GroupedGraph, String> {
        check_version(&self.version, GRAPH_VERSION)?;
        if self.groups != self.dims.len() {
            return Err(format!("M = {} but {} group dims listed", self.groups, self.dims.len()));
        }
        let d: usize = self.dims.iter().sum();
        let adj = Matrix::from_vec(d, d, self.adjacency.clone())
            .ok_or_else(|| format!("adjacency has {} entries, expected {}", self.adjacency.len(), d * d))?;
        let generator = Generator::from_name(&self.metadata.generator)
            .ok_or_else(|| format!("unknown generator {:?}", self.metadata.generator))?;
        let g = GroupedGraph::new(GroupLayout::new(self.dims.clone()), adj, self.confounder_mask.clone())
            .map_err(|e| e.to_string())?;
        Ok(g.with_meta(generator, self.metadata.seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gcarl_core::graphs::gen_cyclic_confounded;

    #[test]
    fn graph_round_trips() {
        let g = gen_cyclic_confounded(3, 2, 5).unwrap();
        let text = serde_json::to_string(&GraphFile::from_graph(&g)).unwrap();
        assert!(text.contains("\"M\":3"));
        let back: GraphFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_graph().unwrap(), g);
    }

    #[test]
    fn inconsistent_shape_rejected() {
        let g = gen_cyclic_confounded(3, 2, 5).unwrap();
        let mut f = GraphFile::from_graph(&g);
        f.adjacency.pop();
        assert!(f.to_graph().is_err());
        let mut f = GraphFile::from_graph(&g);
        f.groups = 2;
        assert!(f.to_graph().is_err());
    }
}
