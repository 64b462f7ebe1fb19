#include "ffl/model.hpp"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace ffl {
namespace {

std::vector<Index> layerOutputShape(const LayerSpec& layer, const std::vector<Index>& in) {
  if (std::holds_alternative<DenseLayer>(layer)) {
    const auto& d = std::get<DenseLayer>(layer);
    if (in.size() != 1 || in[0] != d.in)
      throw std::invalid_argument("dense layer '" + d.name + "' input shape mismatch");
    return {d.out};
  }
  if (std::holds_alternative<ReluLayer>(layer)) return in;
  if (std::holds_alternative<Conv2DLayer>(layer)) {
    const auto& c = std::get<Conv2DLayer>(layer);
    if (in.size() != 3 || in[0] != c.in_ch)
      throw std::invalid_argument("conv layer '" + c.name + "' input shape mismatch");
    if (in[1] < c.kernel || in[2] < c.kernel)
      throw std::invalid_argument("conv layer '" + c.name + "' kernel larger than input");
    Index oh = (in[1] - c.kernel) / c.stride + 1;
    Index ow = (in[2] - c.kernel) / c.stride + 1;
    return {c.out_ch, oh, ow};
  }
  if (std::holds_alternative<MaxPool2DLayer>(layer)) {
    const auto& p = std::get<MaxPool2DLayer>(layer);
    if (in.size() != 3) throw std::invalid_argument("maxpool input must be (C,H,W)");
    if (in[1] < p.kernel || in[2] < p.kernel)
      throw std::invalid_argument("maxpool kernel larger than input");
    return {in[0], in[1] / p.kernel, in[2] / p.kernel};
  }
  // Flatten
  Index n = 1;
  for (Index d : in) n *= d;
  return {n};
}

Index sampleSize(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

}  // namespace

void ModelSpec::validate() const {
  if (input_shape.empty()) throw std::invalid_argument("model input shape is empty");
  for (Index d : input_shape)
    if (d <= 0) throw std::invalid_argument("model input dims must be positive");
  std::set<std::string> names;
  std::vector<Index> cur = input_shape;
  for (const auto& layer : layers) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      if (d->name.empty() || d->in <= 0 || d->out <= 0)
        throw std::invalid_argument("invalid dense layer spec");
      if (!names.insert(d->name).second)
        throw std::invalid_argument("duplicate layer name '" + d->name + "'");
    } else if (const auto* c = std::get_if<Conv2DLayer>(&layer)) {
      if (c->name.empty() || c->in_ch <= 0 || c->out_ch <= 0 || c->kernel <= 0 || c->stride <= 0)
        throw std::invalid_argument("invalid conv layer spec");
      if (!names.insert(c->name).second)
        throw std::invalid_argument("duplicate layer name '" + c->name + "'");
    } else if (const auto* p = std::get_if<MaxPool2DLayer>(&layer)) {
      if (p->kernel <= 0) throw std::invalid_argument("invalid maxpool kernel");
    }
    cur = layerOutputShape(layer, cur);
  }
}

std::vector<Index> ModelSpec::outputShape() const {
  std::vector<Index> cur = input_shape;
  for (const auto& layer : layers) cur = layerOutputShape(layer, cur);
  return cur;
}

Index ModelSpec::outputDim() const { return sampleSize(outputShape()); }

std::vector<std::string> ModelSpec::paramLayerNames() const {
  std::vector<std::string> out;
  for (const auto& layer : layers) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) out.push_back(d->name);
    if (const auto* c = std::get_if<Conv2DLayer>(&layer)) out.push_back(c->name);
  }
  return out;
}

Parameters initParams(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  Parameters params;
  for (const auto& layer : spec.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      double bound = std::sqrt(6.0 / double(d->in + d->out));
      std::uniform_real_distribution<double> dist(-bound, bound);
      Tensor w({d->out, d->in});
      for (Index i = 0; i < w.size(); ++i) w[i] = dist(rng);
      params[d->name + ".weight"] = std::move(w);
      params[d->name + ".bias"] = Tensor({d->out});
    } else if (const auto* c = std::get_if<Conv2DLayer>(&layer)) {
      Index fan_in = c->in_ch * c->kernel * c->kernel;
      Index fan_out = c->out_ch * c->kernel * c->kernel;
      double bound = std::sqrt(6.0 / double(fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-bound, bound);
      Tensor w({c->out_ch, c->in_ch, c->kernel, c->kernel});
      for (Index i = 0; i < w.size(); ++i) w[i] = dist(rng);
      params[c->name + ".weight"] = std::move(w);
      params[c->name + ".bias"] = Tensor({c->out_ch});
    }
  }
  return params;
}

namespace {

struct ForwardCache {
  // activations[i] = input tensor of layer i; back() = final output
  std::vector<Tensor> activations;
  // per-maxpool argmax indices, keyed by layer position
  std::map<std::size_t, std::vector<Index>> pool_argmax;
};

const Tensor& paramOf(const Parameters& params, const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) throw std::invalid_argument("missing parameter '" + key + "'");
  return it->second;
}

Tensor runForward(const ModelSpec& spec, const Parameters& params, const Tensor& batch,
                  ForwardCache* cache) {
  spec.validate();
  std::vector<Index> expect = spec.input_shape;
  if (batch.ndim() != Index(expect.size()) + 1)
    throw std::invalid_argument("batch rank mismatch");
  for (std::size_t i = 0; i < expect.size(); ++i)
    if (batch.dim(i + 1) != expect[i]) throw std::invalid_argument("batch shape mismatch");
  if (!batch.allFinite()) throw std::invalid_argument("non-finite values in input batch");

  const Index n = batch.dim(0);
  Tensor cur = batch;
  std::vector<Index> sample = spec.input_shape;
  if (cache) cache->activations.push_back(cur);

  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& layer = spec.layers[li];
    std::vector<Index> out_sample = layerOutputShape(layer, sample);
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      const Tensor& w = paramOf(params, d->name + ".weight");
      const Tensor& b = paramOf(params, d->name + ".bias");
      if (w.shape() != std::vector<Index>{d->out, d->in} || b.shape() != std::vector<Index>{d->out})
        throw std::invalid_argument("parameter shape mismatch for '" + d->name + "'");
      Tensor out({n, d->out});
      out.matrix().noalias() = cur.matrix(n, d->in) * w.matrix().transpose();
      out.matrix().rowwise() += ConstVectorMap(b.data().data(), d->out).transpose();
      cur = std::move(out);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      Tensor out = cur;
      out.data() = out.data().cwiseMax(0.0);
      cur = std::move(out);
    } else if (const auto* c = std::get_if<Conv2DLayer>(&layer)) {
      const Tensor& w = paramOf(params, c->name + ".weight");
      const Tensor& b = paramOf(params, c->name + ".bias");
      const Index ih = sample[1], iw = sample[2];
      const Index oh = out_sample[1], ow = out_sample[2];
      Tensor out({n, c->out_ch, oh, ow});
      const double* x = cur.data().data();
      double* y = out.data().data();
      const double* wp = w.data().data();
      for (Index img = 0; img < n; ++img) {
        for (Index oc = 0; oc < c->out_ch; ++oc) {
          for (Index r = 0; r < oh; ++r) {
            for (Index col = 0; col < ow; ++col) {
              double acc = b[oc];
              for (Index ic = 0; ic < c->in_ch; ++ic) {
                const double* xi = x + ((img * c->in_ch + ic) * ih + r * c->stride) * iw +
                                   col * c->stride;
                const double* wi = wp + ((oc * c->in_ch + ic) * c->kernel) * c->kernel;
                for (Index kr = 0; kr < c->kernel; ++kr)
                  for (Index kc = 0; kc < c->kernel; ++kc)
                    acc += xi[kr * iw + kc] * wi[kr * c->kernel + kc];
              }
              y[((img * c->out_ch + oc) * oh + r) * ow + col] = acc;
            }
          }
        }
      }
      cur = std::move(out);
    } else if (const auto* p = std::get_if<MaxPool2DLayer>(&layer)) {
      const Index ch = sample[0], ih = sample[1], iw = sample[2];
      const Index oh = out_sample[1], ow = out_sample[2];
      Tensor out({n, ch, oh, ow});
      std::vector<Index> argmax(out.size());
      const double* x = cur.data().data();
      double* y = out.data().data();
      for (Index img = 0; img < n; ++img) {
        for (Index c2 = 0; c2 < ch; ++c2) {
          const double* plane = x + (img * ch + c2) * ih * iw;
          for (Index r = 0; r < oh; ++r) {
            for (Index col = 0; col < ow; ++col) {
              Index best = (r * p->kernel) * iw + col * p->kernel;
              double bv = plane[best];
              for (Index kr = 0; kr < p->kernel; ++kr) {
                for (Index kc = 0; kc < p->kernel; ++kc) {
                  Index idx = (r * p->kernel + kr) * iw + (col * p->kernel + kc);
                  if (plane[idx] > bv) { bv = plane[idx]; best = idx; }
                }
              }
              Index oidx = ((img * ch + c2) * oh + r) * ow + col;
              y[oidx] = bv;
              argmax[oidx] = (img * ch + c2) * ih * iw + best;
            }
          }
        }
      }
      if (cache) cache->pool_argmax[li] = std::move(argmax);
      cur = std::move(out);
    } else {  // Flatten
      std::vector<Index> ns = {n, sampleSize(sample)};
      cur = Tensor(ns, cur.data());
    }
    sample = out_sample;
    if (cache) cache->activations.push_back(cur);
  }
  if (!cur.allFinite()) throw std::runtime_error("non-finite values in forward pass");
  return cur;
}

/// Walks layers in reverse; returns parameter gradients.
Parameters runBackward(const ModelSpec& spec, const Parameters& params,
                       const ForwardCache& cache, Tensor dOut) {
  Parameters grads;
  const Index n = cache.activations.front().dim(0);
  for (std::size_t i = spec.layers.size(); i-- > 0;) {
    const auto& layer = spec.layers[i];
    const Tensor& x = cache.activations[i];
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      const Tensor& w = paramOf(params, d->name + ".weight");
      Tensor dW({d->out, d->in});
      Tensor dB({d->out});
      auto dY = dOut.matrix(n, d->out);
      dW.matrix().noalias() = dY.transpose() * x.matrix(n, d->in);
      VectorMap(dB.data().data(), d->out) = dY.colwise().sum().transpose();
      Tensor dX({n, d->in});
      dX.matrix().noalias() = dY * w.matrix();
      grads[d->name + ".weight"] = std::move(dW);
      grads[d->name + ".bias"] = std::move(dB);
      dOut = std::move(dX);
      // restore actual input shape of this layer
      dOut = Tensor(x.shape(), dOut.data());
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      Tensor dX(x.shape(), dOut.data());
      for (Index k = 0; k < dX.size(); ++k)
        if (x[k] <= 0.0) dX[k] = 0.0;
      dOut = std::move(dX);
    } else if (const auto* c = std::get_if<Conv2DLayer>(&layer)) {
      const Tensor& w = paramOf(params, c->name + ".weight");
      const Index ih = x.dim(2), iw = x.dim(3);
      const Index oh = dOut.dim(2), ow = dOut.dim(3);
      Tensor dW(w.shape());
      Tensor dB({c->out_ch});
      Tensor dX(x.shape());
      const double* xp = x.data().data();
      const double* gp = dOut.data().data();
      const double* wp = w.data().data();
      double* dwp = dW.data().data();
      double* dxp = dX.data().data();
      for (Index img = 0; img < n; ++img) {
        for (Index oc = 0; oc < c->out_ch; ++oc) {
          for (Index r = 0; r < oh; ++r) {
            for (Index col = 0; col < ow; ++col) {
              double g = gp[((img * c->out_ch + oc) * oh + r) * ow + col];
              dB[oc] += g;
              for (Index ic = 0; ic < c->in_ch; ++ic) {
                const double* xi = xp + ((img * c->in_ch + ic) * ih + r * c->stride) * iw +
                                   col * c->stride;
                double* dxi = dxp + ((img * c->in_ch + ic) * ih + r * c->stride) * iw +
                              col * c->stride;
                const double* wi = wp + ((oc * c->in_ch + ic) * c->kernel) * c->kernel;
                double* dwi = dwp + ((oc * c->in_ch + ic) * c->kernel) * c->kernel;
                for (Index kr = 0; kr < c->kernel; ++kr) {
                  for (Index kc = 0; kc < c->kernel; ++kc) {
                    dwi[kr * c->kernel + kc] += g * xi[kr * iw + kc];
                    dxi[kr * iw + kc] += g * wi[kr * c->kernel + kc];
                  }
                }
              }
            }
          }
        }
      }
      grads[c->name + ".weight"] = std::move(dW);
      grads[c->name + ".bias"] = std::move(dB);
      dOut = std::move(dX);
    } else if (std::holds_alternative<MaxPool2DLayer>(layer)) {
      const auto& argmax = cache.pool_argmax.at(i);
      Tensor dX(x.shape());
      for (std::size_t k = 0; k < argmax.size(); ++k)
        dX[argmax[k]] += dOut[Index(k)];
      dOut = std::move(dX);
    } else {  // Flatten
      dOut = Tensor(x.shape(), dOut.data());
    }
  }
  return grads;
}

}  // namespace

Tensor forward(const ModelSpec& spec, const Parameters& params, const Tensor& batch) {
  return runForward(spec, params, batch, nullptr);
}

LossAndGrads lossAndGrads(const ModelSpec& spec, const Parameters& params,
                          const Tensor& batch, const Tensor& labels,
                          const LossConfig& cfg) {
  ForwardCache cache;
  Tensor logits = runForward(spec, params, batch, &cache);
  const Index n = logits.dim(0);
  const Index nl = logits.dim(1);
  if (labels.ndim() != 2 || labels.dim(0) != n || labels.dim(1) != nl)
    throw std::invalid_argument("labels shape mismatch");
  if (Index(cfg.pos_weights.size()) != nl)
    throw std::invalid_argument("pos_weights length must equal label count");
  for (double w : cfg.pos_weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw std::invalid_argument("pos_weights must be finite and positive");
  for (Index i = 0; i < labels.size(); ++i)
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw std::invalid_argument("labels must be 0 or 1");

  // per-element: w*y*softplus(-z) + (1-y)*softplus(z), softplus via the
  // overflow-safe identity softplus(z) = max(z,0) + log1p(exp(-|z|))
  const double scale = 1.0 / double(n * nl);
  double loss = 0.0;
  Tensor dZ({n, nl});
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < nl; ++j) {
      const double z = logits[i * nl + j];
      const double y = labels[i * nl + j];
      const double w = cfg.pos_weights[std::size_t(j)];
      const double sp_pos = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));  // softplus(z)
      const double sp_neg = sp_pos - z;                                             // softplus(-z)
      loss += (w * y * sp_neg + (1.0 - y) * sp_pos) * scale;
      const double sig = 1.0 / (1.0 + std::exp(-z));
      dZ[i * nl + j] = (-w * y * (1.0 - sig) + (1.0 - y) * sig) * scale;
    }
  }
  if (!std::isfinite(loss)) throw std::runtime_error("non-finite loss");
  LossAndGrads out;
  out.loss = loss;
  out.grads = runBackward(spec, params, cache, std::move(dZ));
  return out;
}

}  // namespace ffl
