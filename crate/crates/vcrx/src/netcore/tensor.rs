use ndarray::{ArrayView2, ArrayViewMut2};

/// Dense f64 array with a same-shape gradient buffer; the engine's sole
/// parameter container. Gradients accumulate until `zero_grad`.
#[derive(Debug, Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    pub data: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len: usize = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; len], grad: vec![0.0; len] }
    }

    pub fn from_data(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        let len = data.len();
        Tensor { shape: shape.to_vec(), data, grad: vec![0.0; len] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// Row-major 2-d view; panics if the tensor is not rank 2.
    pub fn view2(&self) -> ArrayView2<'_, f64> {
        assert_eq!(self.shape.len(), 2);
        ArrayView2::from_shape((self.shape[0], self.shape[1]), &self.data).unwrap()
    }

    pub fn grad_view2_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        assert_eq!(self.shape.len(), 2);
        ArrayViewMut2::from_shape((self.shape[0], self.shape[1]), &mut self.grad).unwrap()
    }
}
