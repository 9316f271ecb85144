use crate::image::ImageVector;

#[derive(Clone, Debug, PartialEq)]
pub struct IterateRecord<T> {
    /// `i + 1` for the record produced by the `i`-th pass.
    pub iteration: usize,
    pub x: ImageVector<T>,
    pub z: ImageVector<T>,
    /// Objective value at `x⁽ⁱ⁺¹⁾` with anchor `z⁽ⁱ⁺¹⁾`.
    pub objective: f64,
    /// `‖x⁽ⁱ⁺¹⁾ − x⁽ⁱ⁾‖₂`.
    pub step_residual: f64,
    pub fixed_point_residual: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub wall_ms: f64,
}

impl<T> IterateRecord<T> {
    /// `‖x⁽ⁱ⁺¹⁾ − x⁽ⁱ⁾‖₂ / max(1, ‖x⁽ⁱ⁺¹⁾‖₂)`.
    pub fn relative_step_residual(&self) -> f64
    where
        T: crate::scalar::Real,
    {
        self.step_residual / self.x.norm().as_f64().max(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceStatus {
    Completed,
    /// A non-finite value appeared while computing iteration `iteration`.
    NonFinite { iteration: usize, stage: &'static str },
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterateTrace<T> {
    pub initial: ImageVector<T>,
    pub records: Vec<IterateRecord<T>>,
    pub status: TraceStatus,
    pub gamma: T,
}

impl<T: Clone> IterateTrace<T> {
    pub(crate) fn new(initial: ImageVector<T>, gamma: T, capacity: usize) -> Self {
        Self {
            initial,
            records: Vec::with_capacity(capacity),
            status: TraceStatus::Completed,
            gamma,
        }
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Last iterate, or the initial image when no iteration ran.
    pub fn final_iterate(&self) -> &ImageVector<T> {
        self.records.last().map_or(&self.initial, |r| &r.x)
    }

    /// `x⁽⁰⁾, x⁽¹⁾, …`.
    pub fn iterates(&self) -> impl Iterator<Item = &ImageVector<T>> {
        std::iter::once(&self.initial).chain(self.records.iter().map(|r| &r.x))
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn is_completed(&self) -> bool {
        self.status == TraceStatus::Completed
    }
}
