#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "frag/errors.hpp"

namespace frag::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;

// Parameter tensor with its gradient accumulator.
struct Param {
  Matrix w;
  Matrix g;

  void init(int rows, int cols, std::mt19937_64& rng, double std_dev) {
    std::normal_distribution<double> dist(0.0, std_dev);
    w.resize(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) w(i, j) = std_dev == 0.0 ? 0.0 : dist(rng);
    g = Matrix::Zero(rows, cols);
  }

  void zero_grad() { g.setZero(); }
  long size() const { return w.size(); }
};

struct NamedParam {
  std::string name;
  Param* param;
};

using ParamList = std::vector<NamedParam>;

inline long parameter_count(const ParamList& params) {
  long n = 0;
  for (const NamedParam& p : params) n += p.param->size();
  return n;
}

inline double grad_norm(const ParamList& params) {
  double s = 0;
  for (const NamedParam& p : params) s += p.param->g.squaredNorm();
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Layers. Each stores the activations of its latest forward call; backward
// must follow the matching forward (training runs one sequence at a time and
// accumulates gradients across a batch).
// ---------------------------------------------------------------------------

struct Linear {
  Param weight;  // (in, out): y = x * W + b
  Param bias;    // (1, out)

  void init(int in, int out, std::mt19937_64& rng, double std_dev) {
    weight.init(in, out, rng, std_dev);
    bias.init(1, out, rng, 0.0);
  }

  Matrix forward(const Matrix& x) {
    x_cache = x;
    return (x * weight.w).rowwise() + bias.w.row(0);
  }

  Matrix forward_const(const Matrix& x) const {
    return (x * weight.w).rowwise() + bias.w.row(0);
  }

  Matrix backward(const Matrix& dy, bool accumulate_params) {
    if (accumulate_params) {
      weight.g.noalias() += x_cache.transpose() * dy;
      bias.g.row(0) += dy.colwise().sum();
    }
    return dy * weight.w.transpose();
  }

  void collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
  }

  Matrix x_cache;
};

inline double gelu_scalar(double x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(kC * (x + 0.044715 * x * x * x)));
}

inline double gelu_grad_scalar(double x) {
  constexpr double kC = 0.7978845608028654;
  double x3 = x * x * x;
  double t = std::tanh(kC * (x + 0.044715 * x3));
  double dt = (1.0 - t * t) * kC * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * dt;
}

struct Gelu {
  Matrix forward(const Matrix& x) {
    x_cache = x;
    return x.unaryExpr([](double v) { return gelu_scalar(v); });
  }
  Matrix forward_const(const Matrix& x) const {
    return x.unaryExpr([](double v) { return gelu_scalar(v); });
  }
  Matrix backward(const Matrix& dy) const {
    return dy.cwiseProduct(x_cache.unaryExpr([](double v) { return gelu_grad_scalar(v); }));
  }
  Matrix x_cache;
};

struct LayerNorm {
  static constexpr double kEps = 1e-5;
  Param gamma;  // (1, d)
  Param beta;   // (1, d)

  void init(int d) {
    gamma.w = Matrix::Ones(1, d);
    gamma.g = Matrix::Zero(1, d);
    beta.w = Matrix::Zero(1, d);
    beta.g = Matrix::Zero(1, d);
  }

  Matrix forward(const Matrix& x) {
    const int d = static_cast<int>(x.cols());
    xhat.resizeLike(x);
    rstd.resize(x.rows());
    for (int r = 0; r < x.rows(); ++r) {
      double mean = x.row(r).mean();
      double var = (x.row(r).array() - mean).square().sum() / d;
      rstd(r) = 1.0 / std::sqrt(var + kEps);
      xhat.row(r) = (x.row(r).array() - mean) * rstd(r);
    }
    return (xhat.array().rowwise() * gamma.w.row(0).array()).rowwise() +
           beta.w.row(0).array();
  }

  Matrix forward_const(const Matrix& x) const {
    const int d = static_cast<int>(x.cols());
    Matrix out(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
      double mean = x.row(r).mean();
      double var = (x.row(r).array() - mean).square().sum() / d;
      double rs = 1.0 / std::sqrt(var + kEps);
      out.row(r) = ((x.row(r).array() - mean) * rs) * gamma.w.row(0).array() +
                   beta.w.row(0).array();
    }
    return out;
  }

  Matrix backward(const Matrix& dy, bool accumulate_params) {
    const int d = static_cast<int>(dy.cols());
    if (accumulate_params) {
      gamma.g.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
      beta.g.row(0) += dy.colwise().sum();
    }
    Matrix dx(dy.rows(), d);
    for (int r = 0; r < dy.rows(); ++r) {
      RowArray gdy = dy.row(r).array() * gamma.w.row(0).array();
      double m1 = gdy.mean();
      double m2 = (gdy * xhat.row(r).array()).mean();
      dx.row(r) = ((gdy - m1 - xhat.row(r).array() * m2) * rstd(r)).matrix();
    }
    return dx;
  }

  void collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", &gamma});
    out.push_back({prefix + ".beta", &beta});
  }

  Matrix xhat;
  Vector rstd;
};

// Row-wise softmax in place.
inline void softmax_rows(Matrix& x) {
  for (int r = 0; r < x.rows(); ++r) {
    double mx = x.row(r).maxCoeff();
    x.row(r) = (x.row(r).array() - mx).exp();
    x.row(r) /= x.row(r).sum();
  }
}

// Two-layer perceptron with a GELU in between (Query/Key/Value nets of the
// injection module).
struct Mlp2 {
  Linear fc1;
  Gelu act;
  Linear fc2;

  void init(int in, int hidden, int out, std::mt19937_64& rng, double std_dev) {
    fc1.init(in, hidden, rng, std_dev);
    fc2.init(hidden, out, rng, std_dev);
  }

  Matrix forward(const Matrix& x) { return fc2.forward(act.forward(fc1.forward(x))); }
  Matrix forward_const(const Matrix& x) const {
    return fc2.forward_const(act.forward_const(fc1.forward_const(x)));
  }
  Matrix backward(const Matrix& dy, bool accumulate_params) {
    return fc1.backward(act.backward(fc2.backward(dy, accumulate_params)), accumulate_params);
  }
  void collect(ParamList& out, const std::string& prefix) {
    fc1.collect(out, prefix + ".fc1");
    fc2.collect(out, prefix + ".fc2");
  }
};

// ---------------------------------------------------------------------------
// AdamW.
// ---------------------------------------------------------------------------

struct AdamW {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  void attach(const ParamList& params) {
    m_.clear();
    v_.clear();
    for (const NamedParam& p : params) {
      m_.push_back(Matrix::Zero(p.param->w.rows(), p.param->w.cols()));
      v_.push_back(Matrix::Zero(p.param->w.rows(), p.param->w.cols()));
    }
    t_ = 0;
  }

  void step(const ParamList& params) {
    if (m_.size() != params.size()) throw ShapeMismatch("optimizer not attached");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1, t_);
    double bc2 = 1.0 - std::pow(beta2, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      Param& p = *params[i].param;
      m_[i] = beta1 * m_[i] + (1.0 - beta1) * p.g;
      v_[i] = beta2 * v_[i] + (1.0 - beta2) * p.g.cwiseProduct(p.g);
      Matrix mhat = m_[i] / bc1;
      Matrix vhat = v_[i] / bc2;
      if (weight_decay != 0.0) p.w -= lr * weight_decay * p.w;
      p.w.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
    }
  }

  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

}  // namespace frag::nn
