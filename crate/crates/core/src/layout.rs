//! Mapping between [`Parameters`] and a flat vector of free parameters.
//!
//! Order: mixing logits `theta[1..S]`, class means, variances, then for each
//! item its intercepts (class-major, non-baseline categories) followed by its
//! unconstrained slopes. Variances appear on the log scale in the *packed*
//! vector used for optimisation and differentiation, and on their natural
//! scale in [`ParamLayout::natural`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math;
use crate::model;
use crate::params::Parameters;
use crate::spec::{ModelSpec, SlopeConstraint, VarianceMode};

/// What a free parameter is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Logit { class: usize },
    Mean { class: usize },
    /// `class` is `None` for a common variance.
    Variance { class: Option<usize> },
    Intercept { item: usize, class: usize, category: usize },
    /// `class` is `None` for a slope shared across classes.
    Slope { item: usize, class: Option<usize>, category: usize },
}

#[derive(Debug, Clone)]
pub struct ParamLayout {
    spec: ModelSpec,
    kinds: Vec<ParamKind>,
}

impl ParamLayout {
    pub fn new(spec: &ModelSpec) -> Self {
        let s = spec.n_classes();
        let mut kinds = Vec::with_capacity(spec.n_free_params());
        kinds.extend((1..s).map(|class| ParamKind::Logit { class }));
        if spec.variant().models_external() {
            kinds.extend((0..s).map(|class| ParamKind::Mean { class }));
            match spec.variance_mode() {
                VarianceMode::Heteroscedastic => {
                    kinds.extend((0..s).map(|c| ParamKind::Variance { class: Some(c) }))
                }
                VarianceMode::Common => kinds.push(ParamKind::Variance { class: None }),
            }
        }
        for (item, &k) in spec.cardinalities().iter().enumerate() {
            for class in 0..s {
                kinds.extend((1..k).map(|category| ParamKind::Intercept { item, class, category }));
            }
            match spec.slope(item) {
                SlopeConstraint::Free => {
                    for class in 0..s {
                        kinds.extend((1..k).map(|category| ParamKind::Slope {
                            item,
                            class: Some(class),
                            category,
                        }));
                    }
                }
                SlopeConstraint::Equal => {
                    kinds.extend((1..k).map(|category| ParamKind::Slope { item, class: None, category }))
                }
                SlopeConstraint::Zero => {}
            }
        }
        debug_assert_eq!(kinds.len(), spec.n_free_params());
        ParamLayout { spec: spec.clone(), kinds }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kinds(&self) -> &[ParamKind] {
        &self.kinds
    }

    pub fn index_of(&self, kind: ParamKind) -> Option<usize> {
        self.kinds.iter().position(|&k| k == kind)
    }

    /// Indices of the class means, in class order.
    pub fn mean_indices(&self) -> Vec<usize> {
        self.indices(|k| matches!(k, ParamKind::Mean { .. }))
    }

    pub fn variance_indices(&self) -> Vec<usize> {
        self.indices(|k| matches!(k, ParamKind::Variance { .. }))
    }

    pub fn slope_indices(&self, item: usize) -> Vec<usize> {
        self.indices(|k| matches!(k, ParamKind::Slope { item: j, .. } if j == item))
    }

    fn indices(&self, pred: impl Fn(ParamKind) -> bool) -> Vec<usize> {
        (0..self.kinds.len()).filter(|&i| pred(self.kinds[i])).collect()
    }

    /// Human-readable name of parameter `index` (1-based classes/categories).
    pub fn label(&self, index: usize, item_names: &[String]) -> String {
        let item_name = |j: usize| {
            item_names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("y{}", j + 1))
        };
        match self.kinds[index] {
            ParamKind::Logit { class } => format!("theta[{}]", class + 1),
            ParamKind::Mean { class } => format!("mu[{}]", class + 1),
            ParamKind::Variance { class: Some(c) } => format!("sigma2[{}]", c + 1),
            ParamKind::Variance { class: None } => String::from("sigma2"),
            ParamKind::Intercept { item, class, category } => {
                format!("{}.intercept[{}][{}]", item_name(item), class + 1, category)
            }
            ParamKind::Slope { item, class: Some(c), category } => {
                format!("{}.slope[{}][{}]", item_name(item), c + 1, category)
            }
            ParamKind::Slope { item, class: None, category } => {
                format!("{}.slope[*][{}]", item_name(item), category)
            }
        }
    }

    /// Free parameters with variances on the log scale.
    pub fn pack(&self, params: &Parameters) -> Vec<f64> {
        self.kinds
            .iter()
            .map(|&kind| match kind {
                ParamKind::Variance { class } => math::ln(variance_of(params, class)),
                other => self.natural_value(params, other),
            })
            .collect()
    }

    /// Free parameters on their natural scale.
    pub fn natural(&self, params: &Parameters) -> Vec<f64> {
        self.kinds
            .iter()
            .map(|&kind| match kind {
                ParamKind::Variance { class } => variance_of(params, class),
                other => self.natural_value(params, other),
            })
            .collect()
    }

    fn natural_value(&self, params: &Parameters, kind: ParamKind) -> f64 {
        match kind {
            ParamKind::Logit { class } => params.theta[class],
            ParamKind::Mean { class } => params.external.as_ref().map_or(0.0, |e| e.mu[class]),
            ParamKind::Variance { class } => variance_of(params, class),
            ParamKind::Intercept { item, class, category } => {
                params.items[item].intercept(class, category)
            }
            ParamKind::Slope { item, class, category } => {
                params.items[item].slope(class.unwrap_or(0), category)
            }
        }
    }

    /// Derivative of each natural-scale parameter with respect to its packed
    /// counterpart (the diagonal of the delta-method Jacobian).
    pub fn natural_jacobian(&self, params: &Parameters) -> Vec<f64> {
        self.kinds
            .iter()
            .map(|&kind| match kind {
                ParamKind::Variance { class } => variance_of(params, class),
                _ => 1.0,
            })
            .collect()
    }

    /// Inverse of [`ParamLayout::pack`].
    pub fn unpack(&self, packed: &[f64]) -> Result<Parameters> {
        if packed.len() != self.kinds.len() {
            return Err(Error::invalid(format!(
                "expected {} free parameters, got {}",
                self.kinds.len(),
                packed.len()
            )));
        }
        let s = self.spec.n_classes();
        let mut params = Parameters::zeros(&self.spec);
        for (&kind, &value) in self.kinds.iter().zip(packed) {
            match kind {
                ParamKind::Logit { class } => params.theta[class] = value,
                ParamKind::Mean { class } => {
                    if let Some(e) = params.external.as_mut() {
                        e.mu[class] = value;
                    }
                }
                ParamKind::Variance { class } => {
                    if let Some(e) = params.external.as_mut() {
                        let v = math::exp(value);
                        match class {
                            Some(c) => e.sigma2[c] = v,
                            None => e.sigma2.iter_mut().for_each(|x| *x = v),
                        }
                    }
                }
                ParamKind::Intercept { item, class, category } => {
                    params.items[item].set_intercept(class, category, value)
                }
                ParamKind::Slope { item, class: Some(c), category } => {
                    params.items[item].set_slope(c, category, value)
                }
                ParamKind::Slope { item, class: None, category } => {
                    for c in 0..s {
                        params.items[item].set_slope(c, category, value);
                    }
                }
            }
        }
        Ok(params)
    }

    /// Analytic gradient of the log-likelihood with respect to the packed
    /// vector, evaluated at `params`.
    pub fn score(&self, params: &Parameters, data: &Dataset) -> Result<Vec<f64>> {
        self.spec.check_data(data)?;
        params.validate(&self.spec)?;
        let (post, _) = model::evaluate_unchecked(params, data)?;
        Ok(self.score_given(params, &post, data))
    }

    /// [`Self::score`] with the posteriors at `params` already computed.
    pub(crate) fn score_given(&self, params: &Parameters, post: &crate::posterior::Posteriors, data: &Dataset) -> Vec<f64> {
        let s = self.spec.n_classes();
        let props = params.class_proportions();
        let z = data.z();

        // Accumulate dense per-class gradients, then gather into the layout.
        let mut g_theta = vec![0.0; s];
        let mut g_mu = vec![0.0; s];
        let mut g_logvar = vec![0.0; s];
        let mut g_b0: Vec<Vec<f64>> = self
            .spec
            .cardinalities()
            .iter()
            .map(|&k| vec![0.0; s * k])
            .collect();
        let mut g_b1 = g_b0.clone();
        let mut probs = Vec::new();

        for i in 0..data.n() {
            let zi = z[i];
            let row = post.row(i);
            for c in 0..s {
                let w = row[c];
                g_theta[c] += w - props[c];
                if let Some(e) = &params.external {
                    let d = zi - e.mu[c];
                    g_mu[c] += w * d / e.sigma2[c];
                    g_logvar[c] += w * (-0.5 + d * d / (2.0 * e.sigma2[c]));
                }
                if w == 0.0 {
                    continue;
                }
                for (j, item) in params.items.iter().enumerate() {
                    let k = item.n_categories();
                    probs.clear();
                    probs.extend((0..k).map(|cat| math::exp(model::item_log_prob(item, c, cat, zi))));
                    let y = data.code(i, j);
                    for cat in 1..k {
                        let resid = w * (f64::from(u8::from(y == cat)) - probs[cat]);
                        g_b0[j][c * k + cat] += resid;
                        g_b1[j][c * k + cat] += resid * zi;
                    }
                }
            }
        }

        self
            .kinds
            .iter()
            .map(|&kind| match kind {
                ParamKind::Logit { class } => g_theta[class],
                ParamKind::Mean { class } => g_mu[class],
                ParamKind::Variance { class: Some(c) } => g_logvar[c],
                ParamKind::Variance { class: None } => g_logvar.iter().sum(),
                ParamKind::Intercept { item, class, category } => {
                    g_b0[item][class * self.spec.cardinalities()[item] + category]
                }
                ParamKind::Slope { item, class: Some(c), category } => {
                    g_b1[item][c * self.spec.cardinalities()[item] + category]
                }
                ParamKind::Slope { item, class: None, category } => {
                    let k = self.spec.cardinalities()[item];
                    (0..s).map(|c| g_b1[item][c * k + category]).sum()
                }
            })
            .collect()
    }
}

fn variance_of(params: &Parameters, class: Option<usize>) -> f64 {
    params
        .external
        .as_ref()
        .map_or(1.0, |e| e.sigma2[class.unwrap_or(0)])
}
