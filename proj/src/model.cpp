#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

std::string layer_name(const Layer& layer, int index) {
  std::ostringstream os;
  os << "layer " << index << " (";
  if (const auto* d = std::get_if<DenseLayer>(&layer)) {
    os << "dense " << d->in_dim << "->" << d->out_dim;
  } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
    os << "conv2d " << c->in_ch << "->" << c->out_ch << " k" << c->kernel << " s" << c->stride;
  } else {
    os << "relu";
  }
  os << ")";
  return os.str();
}

struct ConvGeometry {
  int out_h = 0, out_w = 0;
  int pad_top = 0, pad_left = 0;
};

ConvGeometry conv_geometry(const Conv2dLayer& c, const TensorShape& in) {
  ConvGeometry g;
  if (c.padding == Padding::kValid) {
    g.out_h = (in.height - c.kernel) / c.stride + 1;
    g.out_w = (in.width - c.kernel) / c.stride + 1;
  } else {
    g.out_h = (in.height + c.stride - 1) / c.stride;
    g.out_w = (in.width + c.stride - 1) / c.stride;
    int pad_h = std::max((g.out_h - 1) * c.stride + c.kernel - in.height, 0);
    int pad_w = std::max((g.out_w - 1) * c.stride + c.kernel - in.width, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  }
  return g;
}

}  // namespace

ModelSpec ModelSpec::mlp(int input_dim, const std::vector<int>& hidden, int num_classes,
                         bool bias) {
  std::vector<Layer> layers;
  int cur = input_dim;
  for (int h : hidden) {
    layers.push_back(DenseLayer{cur, h, bias});
    layers.push_back(ReluLayer{});
    cur = h;
  }
  layers.push_back(DenseLayer{cur, num_classes, bias});
  return make_model_spec(TensorShape{1, 1, input_dim}, std::move(layers), num_classes);
}

ModelSpec make_model_spec(TensorShape input, std::vector<Layer> layers, int num_classes) {
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (input.flat() <= 0) throw ConfigError("model: input shape must be nonempty");
  if (layers.empty()) throw ConfigError("model: at least one layer required");

  TensorShape cur = input;
  std::size_t total = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      if (d->in_dim <= 0 || d->out_dim <= 0)
        throw ConfigError(layer_name(layer, static_cast<int>(i)) + ": dims must be positive");
      if (cur.flat() != d->in_dim)
        throw ConfigError(layer_name(layer, static_cast<int>(i)) + ": expects input dim " +
                          std::to_string(d->in_dim) + " but previous layer produces " +
                          std::to_string(cur.flat()));
      total += static_cast<std::size_t>(d->in_dim) * d->out_dim + (d->has_bias ? d->out_dim : 0);
      cur = TensorShape{1, 1, d->out_dim};
    } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      if (c->in_ch <= 0 || c->out_ch <= 0 || c->kernel <= 0 || c->stride < 1)
        throw ConfigError(layer_name(layer, static_cast<int>(i)) + ": bad geometry");
      if (cur.channels != c->in_ch)
        throw ConfigError(layer_name(layer, static_cast<int>(i)) + ": expects " +
                          std::to_string(c->in_ch) + " input channels but previous layer produces " +
                          std::to_string(cur.channels));
      if (c->padding == Padding::kValid &&
          (cur.height < c->kernel || cur.width < c->kernel))
        throw ConfigError(layer_name(layer, static_cast<int>(i)) + ": kernel larger than input " +
                          std::to_string(cur.height) + "x" + std::to_string(cur.width));
      ConvGeometry g = conv_geometry(*c, cur);
      total += static_cast<std::size_t>(c->out_ch) * c->in_ch * c->kernel * c->kernel;
      cur = TensorShape{c->out_ch, g.out_h, g.out_w};
    } else {
      // relu keeps the shape
    }
  }
  if (cur.flat() != num_classes)
    throw ConfigError("model: final layer produces " + std::to_string(cur.flat()) +
                      " outputs, expected num_classes = " + std::to_string(num_classes));

  ModelSpec spec;
  spec.input = input;
  spec.layers = std::move(layers);
  spec.num_classes = num_classes;
  spec.total_params = total;
  return spec;
}

Model::Model(ModelSpec spec) : spec_(make_model_spec(spec.input, spec.layers, spec.num_classes)) {
  TensorShape cur = spec_.input;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    LayerInfo li;
    li.in = cur;
    li.param_offset = offset;
    if (const auto* d = std::get_if<DenseLayer>(&spec_.layers[i])) {
      li.param_count =
          static_cast<std::size_t>(d->in_dim) * d->out_dim + (d->has_bias ? d->out_dim : 0);
      cur = TensorShape{1, 1, d->out_dim};
    } else if (const auto* c = std::get_if<Conv2dLayer>(&spec_.layers[i])) {
      ConvGeometry g = conv_geometry(*c, cur);
      li.param_count = static_cast<std::size_t>(c->out_ch) * c->in_ch * c->kernel * c->kernel;
      cur = TensorShape{c->out_ch, g.out_h, g.out_w};
    } else {
      li.param_count = 0;
    }
    li.out = cur;
    offset += li.param_count;
    info_.push_back(li);
    slices_.push_back(ParamSlice{static_cast<int>(i), li.param_offset, li.param_count});
  }
}

ParamVector Model::init_params(std::uint64_t seed) const {
  Rng rng(seed);
  ParamVector params(spec_.total_params);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerInfo& li = info_[i];
    if (li.param_count == 0) continue;
    double fan_in = 1.0;
    if (const auto* d = std::get_if<DenseLayer>(&spec_.layers[i])) {
      fan_in = d->in_dim;
    } else if (const auto* c = std::get_if<Conv2dLayer>(&spec_.layers[i])) {
      fan_in = static_cast<double>(c->in_ch) * c->kernel * c->kernel;
    }
    double bound = 1.0 / std::sqrt(fan_in);
    for (std::size_t j = 0; j < li.param_count; ++j) {
      params[li.param_offset + j] = (2.0 * rng.next_double() - 1.0) * bound;
    }
  }
  return params;
}

void Model::check_params(const ParamVector& params) const {
  if (params.size() != spec_.total_params)
    throw std::invalid_argument("params length " + std::to_string(params.size()) +
                                " != model total_params " + std::to_string(spec_.total_params));
}

void Model::check_batch(const Batch& batch) const {
  if (batch.size() < 1) throw std::invalid_argument("batch must hold at least one sample");
  if (batch.dims != spec_.input.flat())
    throw std::invalid_argument("batch dims " + std::to_string(batch.dims) +
                                " != model input dim " + std::to_string(spec_.input.flat()));
  if (batch.inputs.size() != static_cast<std::size_t>(batch.size()) * batch.dims)
    throw std::invalid_argument("batch inputs size inconsistent with n x dims");
  for (int y : batch.labels) {
    if (y < 0 || y >= spec_.num_classes)
      throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(spec_.num_classes) + ")");
  }
}

std::vector<std::vector<double>> Model::forward_acts(const ParamVector& params,
                                                     const Batch& batch) const {
  const int n = batch.size();
  std::vector<std::vector<double>> acts(spec_.layers.size() + 1);
  acts[0] = batch.inputs;

  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerInfo& li = info_[i];
    const std::vector<double>& in = acts[i];
    std::vector<double>& out = acts[i + 1];
    out.assign(static_cast<std::size_t>(n) * li.out.flat(), 0.0);
    const double* w = params.data() + li.param_offset;

    if (const auto* d = std::get_if<DenseLayer>(&spec_.layers[i])) {
      const double* bias = d->has_bias ? w + static_cast<std::size_t>(d->in_dim) * d->out_dim
                                       : nullptr;
      for (int s = 0; s < n; ++s) {
        const double* x = in.data() + static_cast<std::size_t>(s) * d->in_dim;
        double* y = out.data() + static_cast<std::size_t>(s) * d->out_dim;
        for (int o = 0; o < d->out_dim; ++o) {
          const double* wrow = w + static_cast<std::size_t>(o) * d->in_dim;
          double acc = bias ? bias[o] : 0.0;
          for (int k = 0; k < d->in_dim; ++k) acc += wrow[k] * x[k];
          y[o] = acc;
        }
      }
    } else if (const auto* c = std::get_if<Conv2dLayer>(&spec_.layers[i])) {
      ConvGeometry g = conv_geometry(*c, li.in);
      const int ih = li.in.height, iw = li.in.width;
      const int oh = g.out_h, ow = g.out_w, kk = c->kernel;
      for (int s = 0; s < n; ++s) {
        const double* x = in.data() + static_cast<std::size_t>(s) * li.in.flat();
        double* y = out.data() + static_cast<std::size_t>(s) * li.out.flat();
        for (int oc = 0; oc < c->out_ch; ++oc) {
          for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
              double acc = 0.0;
              for (int ic = 0; ic < c->in_ch; ++ic) {
                const double* wk =
                    w + ((static_cast<std::size_t>(oc) * c->in_ch + ic) * kk) * kk;
                for (int ky = 0; ky < kk; ++ky) {
                  int iy = oy * c->stride - g.pad_top + ky;
                  if (iy < 0 || iy >= ih) continue;
                  for (int kx = 0; kx < kk; ++kx) {
                    int ix = ox * c->stride - g.pad_left + kx;
                    if (ix < 0 || ix >= iw) continue;
                    acc += wk[ky * kk + kx] * x[(ic * ih + iy) * iw + ix];
                  }
                }
              }
              y[(oc * oh + oy) * ow + ox] = acc;
            }
          }
        }
      }
    } else {
      for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] > 0.0 ? in[j] : 0.0;
    }
  }
  return acts;
}

namespace {

// Stable softmax of one logit row; returns probabilities.
void softmax_row(const double* z, int c, double* p) {
  double m = z[0];
  for (int j = 1; j < c; ++j) m = std::max(m, z[j]);
  double sum = 0.0;
  for (int j = 0; j < c; ++j) {
    p[j] = std::exp(z[j] - m);
    sum += p[j];
  }
  for (int j = 0; j < c; ++j) p[j] /= sum;
}

int argmax_row(const double* z, int c) {
  int best = 0;
  for (int j = 1; j < c; ++j) {
    if (z[j] > z[best]) best = j;
  }
  return best;
}

}  // namespace

LossAcc Model::forward_loss(const ParamVector& params, const Batch& batch) const {
  check_params(params);
  check_batch(batch);
  auto acts = forward_acts(params, batch);
  const std::vector<double>& logits = acts.back();
  const int n = batch.size();
  const int c = spec_.num_classes;

  double loss = 0.0;
  int correct = 0;
  std::vector<double> p(c);
  for (int s = 0; s < n; ++s) {
    const double* z = logits.data() + static_cast<std::size_t>(s) * c;
    softmax_row(z, c, p.data());
    loss += -std::log(std::max(p[batch.labels[s]], 1e-12));
    if (argmax_row(z, c) == batch.labels[s]) ++correct;
  }
  loss /= n;
  if (!std::isfinite(loss)) throw NumericalError("forward_loss produced non-finite loss");
  return LossAcc{loss, static_cast<double>(correct) / n};
}

std::vector<int> Model::predict(const ParamVector& params, const Batch& batch) const {
  check_params(params);
  check_batch(batch);
  auto acts = forward_acts(params, batch);
  const std::vector<double>& logits = acts.back();
  const int c = spec_.num_classes;
  std::vector<int> out(batch.size());
  for (int s = 0; s < batch.size(); ++s) {
    out[s] = argmax_row(logits.data() + static_cast<std::size_t>(s) * c, c);
  }
  return out;
}

ParamVector Model::grad(const ParamVector& params, const Batch& batch) const {
  check_params(params);
  check_batch(batch);
  auto acts = forward_acts(params, batch);
  const int n = batch.size();
  const int c = spec_.num_classes;

  ParamVector g(spec_.total_params, 0.0);

  // d(mean CE)/d(logits) = (softmax - onehot) / n
  std::vector<double> delta(acts.back().size());
  {
    std::vector<double> p(c);
    for (int s = 0; s < n; ++s) {
      const double* z = acts.back().data() + static_cast<std::size_t>(s) * c;
      softmax_row(z, c, p.data());
      double* d = delta.data() + static_cast<std::size_t>(s) * c;
      for (int j = 0; j < c; ++j) d[j] = p[j] / n;
      d[batch.labels[s]] -= 1.0 / n;
    }
  }

  for (int i = static_cast<int>(spec_.layers.size()) - 1; i >= 0; --i) {
    const LayerInfo& li = info_[i];
    const std::vector<double>& in = acts[i];
    std::vector<double> prev_delta(in.size(), 0.0);
    const double* w = params.data() + li.param_offset;
    double* gw = g.data() + li.param_offset;

    if (const auto* d = std::get_if<DenseLayer>(&spec_.layers[i])) {
      double* gb = d->has_bias ? gw + static_cast<std::size_t>(d->in_dim) * d->out_dim : nullptr;
      for (int s = 0; s < n; ++s) {
        const double* x = in.data() + static_cast<std::size_t>(s) * d->in_dim;
        const double* dy = delta.data() + static_cast<std::size_t>(s) * d->out_dim;
        double* dx = prev_delta.data() + static_cast<std::size_t>(s) * d->in_dim;
        for (int o = 0; o < d->out_dim; ++o) {
          const double* wrow = w + static_cast<std::size_t>(o) * d->in_dim;
          double* gwrow = gw + static_cast<std::size_t>(o) * d->in_dim;
          const double dyo = dy[o];
          for (int k = 0; k < d->in_dim; ++k) {
            gwrow[k] += dyo * x[k];
            dx[k] += dyo * wrow[k];
          }
          if (gb) gb[o] += dyo;
        }
      }
    } else if (const auto* cv = std::get_if<Conv2dLayer>(&spec_.layers[i])) {
      ConvGeometry geo = conv_geometry(*cv, li.in);
      const int ih = li.in.height, iw = li.in.width;
      const int oh = geo.out_h, ow = geo.out_w, kk = cv->kernel;
      for (int s = 0; s < n; ++s) {
        const double* x = in.data() + static_cast<std::size_t>(s) * li.in.flat();
        const double* dy = delta.data() + static_cast<std::size_t>(s) * li.out.flat();
        double* dx = prev_delta.data() + static_cast<std::size_t>(s) * li.in.flat();
        for (int oc = 0; oc < cv->out_ch; ++oc) {
          for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
              const double dyo = dy[(oc * oh + oy) * ow + ox];
              if (dyo == 0.0) continue;
              for (int ic = 0; ic < cv->in_ch; ++ic) {
                const double* wk = w + ((static_cast<std::size_t>(oc) * cv->in_ch + ic) * kk) * kk;
                double* gwk = g.data() + li.param_offset +
                              ((static_cast<std::size_t>(oc) * cv->in_ch + ic) * kk) * kk;
                for (int ky = 0; ky < kk; ++ky) {
                  int iy = oy * cv->stride - geo.pad_top + ky;
                  if (iy < 0 || iy >= ih) continue;
                  for (int kx = 0; kx < kk; ++kx) {
                    int ix = ox * cv->stride - geo.pad_left + kx;
                    if (ix < 0 || ix >= iw) continue;
                    gwk[ky * kk + kx] += dyo * x[(ic * ih + iy) * iw + ix];
                    dx[(ic * ih + iy) * iw + ix] += dyo * wk[ky * kk + kx];
                  }
                }
              }
            }
          }
        }
      }
    } else {
      for (std::size_t j = 0; j < in.size(); ++j) {
        prev_delta[j] = in[j] > 0.0 ? delta[j] : 0.0;
      }
    }
    delta = std::move(prev_delta);
  }
  return g;
}

ParamVector Model::hvp(const ParamVector& params, const Batch& batch, const ParamVector& v) const {
  check_params(params);
  if (v.size() != params.size())
    throw std::invalid_argument("hvp: v length != params length");
  return hvp_central_diff([this, &batch](const ParamVector& p) { return grad(p, batch); },
                          params, v);
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double lr) {
  if (params.size() != grad.size())
    throw std::invalid_argument("sgd_step: params and grad length mismatch");
  ParamVector out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out[i] = params[i] - lr * grad[i];
  return out;
}

ParamVector hvp_central_diff(const GradFn& grad_fn, const ParamVector& params,
                             const ParamVector& v) {
  if (v.size() != params.size())
    throw std::invalid_argument("hvp_central_diff: v length != params length");
  bool all_zero = true;
  for (double x : v) {
    if (x != 0.0) {
      all_zero = false;
      break;
    }
  }
  if (all_zero) return ParamVector(params.size(), 0.0);

  const double eps = 1e-4 * std::max(1.0, linf_norm(params));
  ParamVector plus(params.size()), minus(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    plus[i] = params[i] + eps * v[i];
    minus[i] = params[i] - eps * v[i];
  }
  ParamVector gp = grad_fn(plus);
  ParamVector gm = grad_fn(minus);
  ParamVector out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out[i] = (gp[i] - gm[i]) / (2.0 * eps);
  return out;
}

}  // namespace fedsim
