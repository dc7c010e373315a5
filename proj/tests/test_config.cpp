#include <catch2/catch_amalgamated.hpp>

#include "stitch/config.hpp"

using namespace stitch;
using nlohmann::json;

namespace {

std::string invalid_message(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidConfig) return e.what();
    return "wrong code";
  }
  return "";
}

}  // namespace

TEST_CASE("empty document gives the defaults") {
  const RunConfig c = parse_config(json::object());
  CHECK(c.generator.n_iq == 256);
  CHECK(c.model.n_iq == 256);
  CHECK(c.model.classes == 5);
  CHECK(c.data.train_count == 2000);
  CHECK(c.data.heldout_count == 500);
  CHECK(c.generator.p_empty == 0.05);
  CHECK(c.generator.p_center == 0.5);
  CHECK(c.generator.max_signals == 2);
  CHECK(c.bank.build.fft_size == 256);
}

TEST_CASE("seed feeds the generator and the trainer") {
  const RunConfig c = parse_config(json{{"seed", 99}});
  CHECK(c.generator.master_seed == 99);
  CHECK(c.train.seed == 99);
}

TEST_CASE("bank geometry follows the generator unless given") {
  const RunConfig c = parse_config(json{{"generator", {{"n_iq", 1024}}}});
  CHECK(c.bank.build.fft_size == 1024);
  CHECK(c.model.n_iq == 1024);
  CHECK_FALSE(invalid_message(json{{"generator", {{"n_iq", 1024}}}, {"bank", {{"fft_size", 256}}}}).empty());
}

TEST_CASE("every problem is reported at once") {
  const json bad = {{"generator", {{"n_iq", 300}, {"p_empty", 1.5}}},
                    {"train", {{"batch_size", 0}}},
                    {"tiling", {{"overlap", 1.0}}},
                    {"colour", "blue"}};
  const std::string msg = invalid_message(bad);
  CHECK(msg.find("colour: unknown key") != std::string::npos);
  CHECK(msg.find("n_iq") != std::string::npos);
  CHECK(msg.find("p_empty") != std::string::npos);
  CHECK(msg.find("batch_size") != std::string::npos);
  CHECK(msg.find("overlap") != std::string::npos);
}

TEST_CASE("wrong types are reported") {
  const std::string msg = invalid_message(json{{"train", {{"epochs", "many"}}}});
  CHECK(msg.find("train.epochs: wrong type") != std::string::npos);
}

TEST_CASE("model widths") {
  const RunConfig c = parse_config(json{{"model", {{"widths", {4, 8, 16, 32, 64}}, {"use_nonlocal", false}}}});
  CHECK(c.model.widths[4] == 64);
  CHECK_FALSE(c.model.use_nonlocal);
  CHECK_FALSE(invalid_message(json{{"model", {{"widths", {4, 8}}}}}).empty());
  CHECK_FALSE(invalid_message(json{{"model", {{"widths", {8, 4, 16, 32, 64}}}}}).empty());
}

TEST_CASE("input features and augmentation") {
  CHECK(parse_config(json::object()).model.features == nn::InputFeatures::LogMagnitude);
  const RunConfig c = parse_config(json{{"model", {{"input_features", "iq"}}}, {"train", {{"mirror_bins", true}, {"weight_decay", 1e-4}}}});
  CHECK(c.model.features == nn::InputFeatures::Iq);
  CHECK(c.train.mirror_bins);
  CHECK(c.train.weight_decay == 1e-4);
  CHECK(parse_config(config_to_json(c)).model.features == nn::InputFeatures::Iq);
  CHECK(invalid_message(json{{"model", {{"input_features", "db"}}}}).find("model.input_features") != std::string::npos);
}

TEST_CASE("tiling multiple must give an integral bin count") {
  CHECK(invalid_message(json{{"tiling", {{"bandwidth_multiple", 4}}}}).empty());
  CHECK_FALSE(invalid_message(json{{"tiling", {{"bandwidth_multiple", 1.001}}}}).empty());
}

TEST_CASE("bench needs 100 runs") {
  CHECK_FALSE(invalid_message(json{{"bench", {{"runs", 10}}}}).empty());
}

TEST_CASE("resolved config round trips through JSON") {
  const RunConfig a = parse_config(json{{"seed", 5}, {"train", {{"lr", 0.2}, {"epochs", 3}}}});
  const RunConfig b = parse_config(config_to_json(a));
  CHECK(config_to_json(a) == config_to_json(b));
  CHECK(b.train.lr == 0.2);
}

TEST_CASE("paths resolve against the output directory") {
  RunConfig c;
  c.out_dir = "runs/x";
  CHECK(c.resolve("bank.sbnk") == std::filesystem::path("runs/x/bank.sbnk"));
  CHECK(c.resolve("/abs/file") == std::filesystem::path("/abs/file"));
}

TEST_CASE("missing config file") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}
