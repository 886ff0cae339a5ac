#include "doctest.h"
#include "feasc/nn.hpp"
#include "oracles.hpp"

using namespace feasc;

namespace {

// Checks analytic input and parameter gradients of L = sum(r * net(x)) by
// central differences.
void check_gradients(Sequential& net, Tensor x, Rng& rng) {
  Trace trace;
  const Tensor y0 = net.forward(x, &trace, Phase::train_frozen);
  const Tensor r = oracle::random_tensor(y0.shape(), rng);
  net.zero_grad();
  const Tensor gx = net.backward(r, trace);

  auto loss = [&]() {
    const Tensor y = net.forward(x, nullptr, Phase::train_frozen);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  for (std::size_t i = 0; i < x.size(); i += 1 + x.size() / 25)
    CHECK(oracle::close_relative(gx[i], oracle::central_difference(loss, x[i]), 1e-4, 1e-8));
  for (Parameter* p : net.parameters())
    for (std::size_t i = 0; i < p->value.size(); i += 1 + p->value.size() / 15)
      CHECK(oracle::close_relative(p->grad[i], oracle::central_difference(loss, p->value[i]), 1e-4, 1e-8));
}

}  // namespace

TEST_CASE("conv + batchnorm + relu gradients match finite differences") {
  Rng rng(10);
  Sequential net;
  net.add<Conv2d>(Conv2dGeometry{2, 3, 3, 2, 1}, rng);
  net.add<BatchNorm>(3);
  net.add<ReLU>();
  net.add<GlobalAvgPool>();
  check_gradients(net, oracle::random_tensor({4, 2, 6, 6}, rng), rng);
}

TEST_CASE("mlp head gradients match finite differences") {
  Rng rng(11);
  Sequential net;
  net.add<Linear>(5, 7, rng, false);
  net.add<BatchNorm>(7);
  net.add<ReLU>();
  net.add<Linear>(7, 4, rng);
  net.add<BatchNorm>(4, false);
  check_gradients(net, oracle::random_tensor({6, 5}, rng), rng);
}

TEST_CASE("batchnorm running statistics follow the training phase") {
  Rng rng(12);
  Sequential net;
  net.add<BatchNorm>(2);
  const Tensor x = oracle::random_tensor({8, 2}, rng, 3, 5);
  auto stats = [&]() { return net.state()[2]->value[0]; };
  net.forward(x, nullptr, Phase::train_frozen);
  CHECK(stats() == 0.0);
  net.forward(x, nullptr, Phase::train);
  CHECK(stats() > 0.0);
  const double after = stats();
  net.forward(x, nullptr, Phase::eval);
  CHECK(stats() == after);
}

TEST_CASE("eval-mode outputs do not depend on batch composition") {
  Rng rng(13);
  Sequential net;
  net.add<Conv2d>(Conv2dGeometry{1, 2, 3, 1, 1}, rng);
  net.add<BatchNorm>(2);
  net.add<ReLU>();
  const Tensor x = oracle::random_tensor({4, 1, 5, 5}, rng);
  net.forward(x, nullptr, Phase::train);
  const Tensor all = net.forward(x, nullptr, Phase::eval);
  Tensor one({1, 1, 5, 5});
  std::copy(x.slice(2).begin(), x.slice(2).end(), one.data());
  const Tensor single = net.forward(one, nullptr, Phase::eval);
  for (std::size_t i = 0; i < single.size(); ++i) CHECK(single[i] == doctest::Approx(all.slice(2)[i]).epsilon(1e-12));
}

TEST_CASE("parameter names are unique and copies are deep") {
  Rng rng(14);
  Sequential net;
  net.add<Linear>(3, 3, rng);
  net.add<BatchNorm>(3);
  std::vector<std::string> names;
  for (auto* p : net.state()) names.push_back(p->name);
  CHECK(names == std::vector<std::string>{"0.weight", "0.bias", "1.gamma", "1.beta", "1.running_mean",
                                          "1.running_var"});
  Sequential copy = net;
  CHECK(same_state(copy, net));
  copy.state()[0]->value[0] += 1;
  CHECK_FALSE(same_state(copy, net));
}

TEST_CASE("ema update closed forms") {
  Rng rng(15);
  Sequential online;
  online.add<Linear>(1, 1, rng, false);
  Sequential target = online;
  online.state()[0]->value[0] = 0.0;
  target.state()[0]->value[0] = 1.0;
  ema_update(target, online, 1.0);
  CHECK(target.state()[0]->value[0] == 1.0);
  ema_update(target, online, 0.996);
  CHECK(target.state()[0]->value[0] == doctest::Approx(0.996).epsilon(1e-15));
  ema_update(target, online, 0.0);
  CHECK(target.state()[0]->value[0] == 0.0);
  CHECK_THROWS_AS(ema_update(target, online, 1.5), ValidationError);

  Sequential other;
  other.add<Linear>(2, 1, rng, false);
  CHECK_THROWS_AS(ema_update(target, other, 0.5), ValidationError);
}
