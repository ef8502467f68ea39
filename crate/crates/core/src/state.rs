/// Membrane potentials and single-spike record of one layer during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub u: Vec<f64>,
    spike_time: Vec<Option<u32>>,
}

impl LayerState {
    pub fn new(neurons: usize) -> Self {
        LayerState {
            u: vec![0.0; neurons],
            spike_time: vec![None; neurons],
        }
    }

    pub fn with_potentials(u: Vec<f64>) -> Self {
        let n = u.len();
        LayerState {
            u,
            spike_time: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    #[inline]
    pub fn fired(&self, i: usize) -> bool {
        self.spike_time[i].is_some()
    }

    /// Records the one spike of neuron `i`. Returns false (and records
    /// nothing) if it already fired.
    pub fn fire(&mut self, i: usize, t: u32) -> bool {
        if self.spike_time[i].is_some() {
            return false;
        }
        self.spike_time[i] = Some(t);
        true
    }

    pub fn spike_time(&self, i: usize) -> Option<u32> {
        self.spike_time[i]
    }

    pub fn spike_times(&self) -> &[Option<u32>] {
        &self.spike_time
    }

    pub fn into_spike_times(self) -> Vec<Option<u32>> {
        self.spike_time
    }

    pub fn spike_count(&self) -> usize {
        self.spike_time.iter().filter(|t| t.is_some()).count()
    }
}
