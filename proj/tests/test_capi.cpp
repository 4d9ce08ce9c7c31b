#include "relrl.h"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

relrl_config* tiny_config(const char* domain, const char* size) {
  relrl_config* c = nullptr;
  REQUIRE(relrl_config_create(&c) == RELRL_OK);
  const char* pairs[][2] = {{"domain", domain}, {"size", size},    {"p_envs", "4"},     {"epoch", "3"},
                            {"epochs", "2"},    {"emb_size", "8"}, {"mp_steps", "2"},   {"step_limit", "5"},
                            {"out", ""}};
  for (const auto& kv : pairs) REQUIRE(relrl_config_set(c, kv[0], kv[1]) == RELRL_OK);
  return c;
}

std::string get(const relrl_config* c, const char* key) {
  size_t needed = 0;
  REQUIRE(relrl_config_get(c, key, nullptr, 0, &needed) == RELRL_OK);
  std::string out(needed, '\0');
  REQUIRE(relrl_config_get(c, key, out.data(), out.size(), nullptr) == RELRL_OK);
  out.resize(needed - 1);
  return out;
}

int count_epochs(const relrl_epoch_metrics* m, void* user) {
  auto* seen = static_cast<std::vector<relrl_epoch_metrics>*>(user);
  seen->push_back(*m);
  return 1;
}

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("configuration") {
    relrl_config* c = tiny_config("sokoban", "6x6/1");
    CHECK(get(c, "mp_steps") == "2");
    CHECK(get(c, "gamma") == "0.99");
    CHECK(relrl_config_set_seed_fallback(c, 12) == RELRL_OK);
    CHECK(get(c, "seed") == "12");
    REQUIRE(relrl_config_set(c, "seed", "5") == RELRL_OK);
    CHECK(get(c, "seed") == "5");

    char small[4];
    size_t needed = 0;
    REQUIRE(relrl_config_get(c, "domain", small, sizeof small, &needed) == RELRL_OK);
    CHECK(needed == 8);
    CHECK(std::string(small) == "sok");

    CHECK(relrl_config_get(c, "nope", nullptr, 0, nullptr) == RELRL_ERR_PARSE);
    CHECK(std::string(relrl_last_error()).find("nope") != std::string::npos);
    CHECK(std::string(relrl_status_name(RELRL_ERR_PARSE)) == "parse error");
    REQUIRE(relrl_config_set(c, "mp_steps", "x") == RELRL_OK);
    CHECK(relrl_config_format(c, nullptr, 0, &needed) == RELRL_ERR_PARSE);
    CHECK(relrl_config_read_file(c, "/nonexistent/relrl.cfg") == RELRL_ERR_IO);
    CHECK(relrl_config_create(nullptr) == RELRL_ERR_INVALID_ARGUMENT);
    relrl_config_free(c);
  }

  TEST_CASE("train, save, load and evaluate") {
    const fs::path dir = fs::temp_directory_path() / "relrl_capi_model";
    fs::remove_all(dir);
    relrl_config* c = tiny_config("blockworld", "3");
    std::vector<relrl_epoch_metrics> epochs;
    relrl_model* m = nullptr;
    REQUIRE(relrl_train(c, count_epochs, &epochs, &m) == RELRL_OK);
    CHECK(epochs.size() == 2);
    CHECK(epochs[1].step == 6);
    CHECK(std::string(relrl_model_domain(m)) == "blockworld");
    CHECK(std::string(relrl_model_size(m)) == "3");
    REQUIRE(relrl_model_save(m, dir.c_str()) == RELRL_OK);
    relrl_model* loaded = nullptr;
    REQUIRE(relrl_model_load(dir.c_str(), &loaded) == RELRL_OK);

    relrl_eval_options o = relrl_eval_defaults();
    CHECK(o.episodes == 100);
    o.episodes = 6;
    o.seed = 3;
    relrl_report a{};
    relrl_report b{};
    REQUIRE(relrl_evaluate(m, &o, &a) == RELRL_OK);
    REQUIRE(relrl_evaluate(loaded, &o, &b) == RELRL_OK);
    CHECK(a.episodes == 6);
    CHECK(a.has_solved);
    CHECK(a.has_optimality);
    CHECK_FALSE(a.has_baseline);
    CHECK(a.mean_return == b.mean_return);
    CHECK(a.solved_fraction == b.solved_fraction);

    const fs::path csv = dir / "report.csv";
    relrl_report reports[1];
    size_t count = 0;
    REQUIRE(relrl_generalize(loaded, &o, "3,4", csv.c_str(), reports, 1, &count) == RELRL_OK);
    CHECK(count == 2);
    CHECK(reports[0].mean_return == a.mean_return);
    CHECK(fs::exists(csv));

    o.domain = "sysadmin_m";
    CHECK(relrl_evaluate(m, &o, &a) == RELRL_ERR_SCHEMA);
    CHECK(relrl_model_load((dir / "missing").c_str(), &loaded) != RELRL_OK);

    relrl_model_free(m);
    relrl_model_free(loaded);
    relrl_config_free(c);
    fs::remove_all(dir);
  }

  TEST_CASE("checks") {
    relrl_gradcheck_result g{};
    REQUIRE(relrl_gradcheck("sysadmin_s", 1, 1e-4, &g) == RELRL_OK);
    CHECK(g.coordinates > 0);
    CHECK(g.failures == 0);
    relrl_enumcheck_result e{};
    REQUIRE(relrl_enumcheck("sysadmin_m", "5", 3, 1, &e) == RELRL_OK);
    CHECK(e.max_actions == 32);
    CHECK(e.max_deviation < 1e-9);
    CHECK(relrl_enumcheck("chess", "5", 3, 1, &e) == RELRL_ERR_PARSE);
  }
}
