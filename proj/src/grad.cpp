#include "sing/grad.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>
#include <utility>

namespace sing {

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace sing

namespace sing::grad {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<std::shared_ptr<Node<T>>> parents,
                   std::function<void(Node<T>&)> rule) {
  if (!value.all_finite()) {
    fail(ErrorKind::kNumericalFailure,
         "non-finite value produced in forward pass (shape " + shape_string(value.shape()) + ")");
  }
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || (p && p->requires_grad);
  }
  if (needs) {
    node->parents = std::move(parents);
    node->backward_rule = std::move(rule);
    node->requires_grad = true;
  }
  return Var<T>(std::move(node));
}

template <typename T>
Parameter<T>::Parameter(std::string name, Tensor<T> init)
    : name_(std::move(name)), var_(std::move(init), true) {
  var_.node()->grad = Tensor<T>(var_.shape());
}

template <typename T>
void Parameter<T>::zero_grad() {
  auto& node = *var_.node();
  if (node.grad.size() != node.value.size()) node.grad = Tensor<T>(node.value.shape());
  node.grad.fill(T(0));
  node.grad_populated = false;
}

template <typename T>
void backward(const Var<T>& loss) {
  require(loss.defined(), "backward on an undefined variable");
  require(loss.size() == 1,
          "backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; recurrent graphs are too deep for recursion.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node<T>* node : order) {
    if (!node->is_leaf()) {
      node->grad = Tensor<T>();
      node->grad_populated = false;
    }
  }
  loss.node()->grad_data()[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->grad.empty()) continue;
    if (!node->grad.all_finite()) {
      fail(ErrorKind::kNumericalFailure,
           "non-finite gradient encountered during backward (shape " +
               shape_string(node->value.shape()) + ")");
    }
    if (!node->is_leaf()) node->backward_rule(*node);
  }
}

template <typename T>
void zero_grads(std::span<Parameter<T>* const> params) {
  for (Parameter<T>* p : params) p->zero_grad();
}

// ---------------------------------------------------------------------------

void GradCheckReport::merge(const GradCheckReport& other) {
  passed = passed && other.passed;
  checked += other.checked;
  skipped += other.skipped;
  if (worst_label.empty() || other.max_error > max_error) {
    max_error = other.max_error;
    worst_label = other.worst_label;
    worst_index = other.worst_index;
    worst_analytic = other.worst_analytic;
    worst_numeric = other.worst_numeric;
  }
}

std::string GradCheckReport::summary() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%s: checked=%zu skipped=%zu max_err=%.3e worst=%s[%zu] analytic=%.6e numeric=%.6e",
                passed ? "pass" : "FAIL", checked, skipped, max_error, worst_label.c_str(),
                worst_index, worst_analytic, worst_numeric);
  return buf;
}

namespace {

std::vector<std::size_t> pick_coordinates(std::size_t n, std::size_t max_coords,
                                          std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (max_coords == 0 || max_coords >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max_coords);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double eval_scalar(const std::function<double()>& f) {
  const double v = f();
  if (!std::isfinite(v)) fail(ErrorKind::kNumericalFailure, "grad_check: function returned a non-finite value");
  return v;
}

// Core loop shared by both entry points: `values` is perturbed in place,
// `analytic` holds the gradient at the unperturbed point.
GradCheckReport check_coordinates(const std::function<double()>& f, std::span<double> values,
                                  std::span<const double> analytic, const std::string& label,
                                  const GradCheckOptions& opt, std::mt19937_64& rng) {
  GradCheckReport report;
  report.worst_label = label;
  const double f0 = eval_scalar(f);
  // Central differences carry a few eps*|f|/step of rounding noise, so
  // relative accuracy `tol` is only meaningful above this magnitude.
  const double noise_floor =
      8.0 * std::numeric_limits<double>::epsilon() * std::abs(f0) / (opt.step * opt.tol);

  auto at = [&](std::size_t i, double offset) {
    const double saved = values[i];
    values[i] = saved + offset;
    const double v = eval_scalar(f);
    values[i] = saved;
    return v;
  };

  for (std::size_t i : pick_coordinates(values.size(), opt.max_coords, rng)) {
    const double fp = at(i, opt.step);
    const double fm = at(i, -opt.step);
    const double numeric = (fp - fm) / (2.0 * opt.step);
    const double a = analytic[i];
    const double diff = std::abs(a - numeric);
    const double scale = std::max(std::abs(a), std::abs(numeric));
    const double err = scale < opt.abs_floor ? diff : diff / std::max(scale, noise_floor);
    if (err > opt.tol && opt.skip_kinks) {
      // Second differences at step and 2*step agree for smooth functions;
      // a slope discontinuity inside the stencil makes them differ ~2x.
      const double h = opt.step;
      const double d2_near = (fp - 2.0 * f0 + fm) / (h * h);
      const double d2_far = (at(i, 2.0 * h) - 2.0 * f0 + at(i, -2.0 * h)) / (4.0 * h * h);
      const double curvature = std::max(std::abs(d2_near), std::abs(d2_far));
      if (std::abs(d2_near - d2_far) > 0.25 * curvature && diff <= h * curvature) {
        ++report.skipped;
        continue;
      }
    }
    ++report.checked;
    if (err >= report.max_error) {
      report.max_error = err;
      report.worst_index = i;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
    if (err > opt.tol) report.passed = false;
  }
  if (report.skipped > report.checked) report.passed = false;
  return report;
}

}  // namespace

GradCheckReport grad_check(const std::function<Var<double>(const Var<double>&)>& f,
                           const Tensor<double>& x, const GradCheckOptions& options) {
  require(options.step > 0.0, "grad_check step must be positive");
  Var<double> leaf(x, true);
  Var<double> out = f(leaf);
  require(out.size() == 1, "grad_check function must return a scalar");
  backward(out);
  Tensor<double> analytic = leaf.grad().size() == x.size() ? leaf.grad() : Tensor<double>(x.shape());

  Tensor<double> probe = x;
  auto eval = [&]() {
    NoGradGuard guard;
    return f(Var<double>(probe, false)).value().item();
  };
  std::mt19937_64 rng(options.seed);
  return check_coordinates(eval, probe.values(), analytic.values(), "x", options, rng);
}

GradCheckReport grad_check_parameters(const std::function<Var<double>()>& loss,
                                      std::span<Parameter<double>* const> params,
                                      const GradCheckOptions& options) {
  require(options.step > 0.0, "grad_check step must be positive");
  zero_grads(params);
  backward(loss());
  std::vector<Tensor<double>> analytic;
  analytic.reserve(params.size());
  for (Parameter<double>* p : params) {
    analytic.push_back(p->grad().size() == p->size() ? p->grad() : Tensor<double>(p->value().shape()));
  }
  auto eval = [&]() {
    NoGradGuard guard;
    return loss().value().item();
  };
  std::mt19937_64 rng(options.seed);
  GradCheckReport total;
  for (std::size_t k = 0; k < params.size(); ++k) {
    total.merge(check_coordinates(eval, params[k]->value().values(), analytic[k].values(),
                                  params[k]->name(), options, rng));
  }
  return total;
}

template Var<float> make_result(Tensor<float>, std::vector<std::shared_ptr<Node<float>>>,
                                std::function<void(Node<float>&)>);
template Var<double> make_result(Tensor<double>, std::vector<std::shared_ptr<Node<double>>>,
                                 std::function<void(Node<double>&)>);
template class Parameter<float>;
template class Parameter<double>;
template void backward(const Var<float>&);
template void backward(const Var<double>&);
template void zero_grads(std::span<Parameter<float>* const>);
template void zero_grads(std::span<Parameter<double>* const>);

}  // namespace sing::grad
