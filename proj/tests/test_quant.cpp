#include <doctest.h>

#include "helpers.hpp"
#include "snnkit/datasets.hpp"
#include "snnkit/quant.hpp"
#include "snnkit/verify.hpp"

using namespace snnkit;

TEST_CASE("quant_relu point values") {
  QuantConfig cfg;
  cfg.levels = 10;
  cfg.offset = 0.5f;
  cfg.clip = 1.0f;
  CHECK(quant_relu(-0.2f, cfg) == 0.0f);
  CHECK(quant_relu(1.5f, cfg) == 1.0f);
  CHECK(quant_relu(0.34f, cfg) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(quant_relu(0.36f, cfg) == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("quant_relu is monotone and grid-valued for extreme inputs") {
  QuantConfig cfg;
  cfg.levels = 7;
  cfg.offset = 0.25f;
  cfg.clip = 1.0f;
  Rng rng(17);
  float prev_x = -1e30f;
  float prev_y = quant_relu(prev_x, cfg);
  std::vector<float> xs;
  for (int i = 0; i < 4000; ++i) xs.push_back(rng.uniformf(-1e6f, 1e6f));
  for (int i = 0; i < 4000; ++i) xs.push_back(rng.uniformf(-2.0f, 2.0f));
  std::sort(xs.begin(), xs.end());
  for (float x : xs) {
    const float y = quant_relu(x, cfg);
    CHECK(y >= prev_y);  // monotone
    CHECK(y >= 0.0f);
    CHECK(y <= cfg.clip);
    prev_x = x;
    prev_y = y;
  }
}

TEST_CASE("mean quantization error halves with the half-step offset") {
  // floor offset: 1/(2 levels); round offset: 1/(4 levels)
  const auto stats = quantization_error_stats(10, 0.0f, 100000, 4242);
  CHECK(stats.mean_abs_err_floor == doctest::Approx(0.05).epsilon(0.05));
  CHECK(stats.mean_abs_err_round == doctest::Approx(0.025).epsilon(0.05));
  CHECK(stats.floor_to_round_ratio == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("swap_activations is an involution and leaves other layers alone") {
  Rng rng(31);
  NetworkGraph net = testutil::random_mlp(rng, {4, 8, 8, 3});
  QuantConfig cfg;
  cfg.levels = 32;

  NetworkGraph no_acts = testutil::random_mlp(rng, {4, 4}, false);
  CHECK(swap_activations(no_acts, SwapDirection::ReluToQuant, cfg) == no_acts);

  const NetworkGraph quant = swap_activations(net, SwapDirection::ReluToQuant, cfg);
  CHECK(quant != net);
  const NetworkGraph back = swap_activations(quant, SwapDirection::QuantToRelu, cfg);
  CHECK(back == net);  // structural equality
}

TEST_CASE("huge level counts make QuantReLU behave like ReLU") {
  Rng rng(13);
  NetworkGraph net = testutil::random_mlp(rng, {5, 12, 4});
  QuantConfig cfg;
  cfg.levels = 1000000;
  cfg.offset = 0.5f;
  cfg.clip = 1e9f;  // unbinding ceiling: only the grid resolution differs from ReLU
  const NetworkGraph quant = swap_activations(net, SwapDirection::ReluToQuant, cfg);
  for (int i = 0; i < 20; ++i) {
    const Tensor x = testutil::random_tensor(rng, {5}, 0.0f, 1.0f);
    const Tensor a = forward_output(net, x);
    const Tensor b = forward_output(quant, x);
    CHECK(max_abs_diff(a, b) < 1e-5);
  }
}

TEST_CASE("zero-epoch finetune returns the parameters unchanged") {
  Rng rng(3);
  NetworkGraph net = testutil::random_mlp(rng, {2, 8, 2});
  QuantConfig cfg;
  cfg.levels = 16;
  cfg.epochs = 0;
  const NetworkGraph quant = swap_activations(net, SwapDirection::ReluToQuant, cfg);
  const Dataset data = make_two_blobs(1, 32);
  const FinetuneResult res = finetune(quant, data, cfg);
  CHECK(res.net == quant);
}

TEST_CASE("finetune rejects plain ReLU activations and mismatched QuantReLU") {
  Rng rng(3);
  NetworkGraph net = testutil::random_mlp(rng, {2, 4, 2});
  QuantConfig cfg;
  cfg.levels = 16;
  const Dataset data = make_two_blobs(1, 16);
  CHECK_THROWS_AS(finetune(net, data, cfg), Error);  // still ReLU
  NetworkGraph other = swap_activations(net, SwapDirection::ReluToQuant, cfg);
  cfg.levels = 8;  // config no longer matches the graph
  CHECK_THROWS_AS(finetune(other, data, cfg), Error);
}

TEST_CASE("finetune separates the two-blob toy set") {
  const Dataset train = make_two_blobs(2024, 256);
  Rng rng(2024);
  NetworkGraph net = testutil::random_mlp(rng, {2, 16, 2});
  QuantConfig cfg;
  cfg.levels = 64;
  cfg.epochs = 40;
  cfg.learning_rate = 0.15;
  cfg.batch_size = 16;
  cfg.seed = 7;
  const NetworkGraph quant = swap_activations(net, SwapDirection::ReluToQuant, cfg);
  const FinetuneResult res = finetune(quant, train, cfg);
  CHECK(res.metrics.back().loss < res.metrics.front().loss);
  const EpochMetrics eval = evaluate(res.net, train, LossKind::SoftmaxCrossEntropy);
  CHECK(eval.accuracy >= 0.99);
}

TEST_CASE("finetune reaches 95 percent on the 8x8 pattern classes within 50 epochs") {
  const Dataset train = make_patterns8x8(555, 24);
  Rng rng(555);
  NetworkGraph net;
  net.input_shape = {1, 8, 8};
  net.layers.push_back(make_linear(64, 48));
  net.layers.push_back(make_relu());
  net.layers.push_back(make_linear(48, 10));
  init_weights(net, rng);
  QuantConfig cfg;
  cfg.levels = 128;
  cfg.epochs = 30;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 16;
  cfg.seed = 555;
  const NetworkGraph quant = swap_activations(net, SwapDirection::ReluToQuant, cfg);
  const FinetuneResult res = finetune(quant, train, cfg);
  const EpochMetrics eval = evaluate(res.net, train, LossKind::SoftmaxCrossEntropy);
  CHECK(eval.accuracy >= 0.95);
}

TEST_CASE("training failure reports the epoch and batch") {
  const Dataset train = make_two_blobs(9, 64);
  Rng rng(9);
  NetworkGraph net = testutil::random_mlp(rng, {2, 8, 2});
  QuantConfig cfg;
  cfg.levels = 16;
  cfg.epochs = 50;
  cfg.learning_rate = 1e9;  // guaranteed blow-up
  cfg.loss = LossKind::MeanSquaredError;
  Dataset mse_data = train;
  mse_data.targets.clear();
  for (int label : train.labels) {
    Tensor t({2});
    t[static_cast<std::size_t>(label)] = 1e6f;
    mse_data.targets.push_back(t);
  }
  const NetworkGraph quant = swap_activations(net, SwapDirection::ReluToQuant, cfg);
  try {
    finetune(quant, mse_data, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Training);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
}

TEST_CASE("quantization-aware training at huge resolution tracks plain ReLU training") {
  const Dataset train = make_two_blobs(77, 128);
  Rng rng_a(77);
  NetworkGraph relu_net = testutil::random_mlp(rng_a, {2, 12, 2});
  NetworkGraph quant_net = relu_net;
  QuantConfig cfg;
  cfg.levels = 1000000;
  cfg.offset = 0.0f;
  cfg.clip = 1e9f;
  cfg.epochs = 15;
  cfg.learning_rate = 0.1;
  cfg.seed = 5;
  quant_net = swap_activations(quant_net, SwapDirection::ReluToQuant, cfg);

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.learning_rate = cfg.learning_rate;
  tc.momentum = cfg.momentum;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  const auto relu_hist = train_sgd(relu_net, train, tc);
  const FinetuneResult quant_res = finetune(quant_net, train, cfg);
  const double relu_loss = relu_hist.back().loss;
  const double quant_loss = quant_res.metrics.back().loss;
  CHECK(std::abs(relu_loss - quant_loss) <= 0.02 * std::max(relu_loss, quant_loss) + 1e-6);
}
