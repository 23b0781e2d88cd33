#include "evreg/io.hpp"

#include <stdexcept>
#include <string>

#include "doctest.h"

using evreg::RunConfig;

namespace {

const char* kRich = R"({
  "task": "bgev_pp",
  "dataset": "fires.tsv",
  "out_dir": "runs/full",
  "seed": 42,
  "workers": 3,
  "sqrt_response": true,
  "pp": {"n_y": 31.0, "p_u": 0.9, "variant": "bgev",
         "blend": {"alpha": 0.5, "beta": 0.5, "p_a": 0.05, "p_b": 0.2, "c1": 5, "c2": 5}},
  "model": {
    "shared_xi": true, "xi_init": 0.25,
    "surfaces": [
      {"name": "q", "link": "identity", "linear": ["alt"], "additive": ["fwi"],
       "knots": 12, "lambda": [0.5], "net": ["t2m", "rh"],
       "layers": [{"kind": "dense", "width": 8}, {"kind": "dense", "width": 4}]},
      {"name": "s", "link": "exponential", "linear": ["fwi", "alt"]}
    ]
  },
  "train": {"epochs": 400, "stride": 20, "lr": 0.005, "selection": "training_loss"},
  "threshold": {"train": {"epochs": 150}},
  "folds": {"k": 4, "seed": 9, "block_len": 6, "validation_fold": 2},
  "bootstrap": {"b": 50, "mean_block_len": 2.5, "seed": 11},
  "metrics": {"stls_p": 0.985, "smad_p1": 0.9, "twcrps": true},
  "pred_quantiles": [0.5, 0.99]
})";

RunConfig rich() { return evreg::parse_run_config(kRich); }

}  // namespace

TEST_CASE("full config parses, echoes canonically, and round-trips") {
  RunConfig c = rich();
  CHECK(c.task == "bgev_pp");
  CHECK(c.workers == 3);
  CHECK(c.sqrt_response);
  CHECK(c.n_y == 31.0);
  CHECK(c.p_u == 0.9);
  CHECK(c.variant == evreg::evt::PpVariant::bgev);
  CHECK(c.surfaces.size() == 2);
  CHECK(c.surfaces[0].net == std::vector<std::string>{"t2m", "rh"});
  CHECK(c.surfaces[0].layers.size() == 2);
  CHECK(c.surfaces[0].layers[1].width == 4);
  CHECK(c.surfaces[1].link == "exponential");
  CHECK(c.train.epochs == 400);
  CHECK(c.train.adam.lr == 0.005);
  CHECK(c.threshold_train.epochs == 150);
  // Unset threshold.train keys inherit the main training settings.
  CHECK(c.threshold_train.stride == 20);
  CHECK(c.threshold_train.adam.lr == 0.005);
  CHECK(c.folds.enabled);
  CHECK(c.folds.validation_fold == 2);
  CHECK_FALSE(c.split.enabled);
  CHECK(c.bootstrap.b == 50);
  CHECK(c.metrics.smad_p1 == 0.9);
  CHECK(c.pred_quantiles == std::vector<double>{0.5, 0.99});

  const std::string echo = evreg::config_echo(c);
  RunConfig back = evreg::parse_run_config(echo);
  CHECK(evreg::config_echo(back) == echo);
  CHECK(back.threshold_train.epochs == 150);
  CHECK(back.folds.enabled);
}

TEST_CASE("defaults cover everything a minimal config omits") {
  RunConfig c = evreg::parse_run_config(
      R"({"task": "simulate", "simulate": {"study": "b2_gpd", "n": 500, "seed": 7}})");
  CHECK(c.scenario.study == evreg::Study::b2_gpd);
  CHECK(c.scenario.n == 500);
  CHECK(c.scenario.coeff_seed == 7777);
  CHECK(c.seed == 1);
  CHECK(c.workers == 1);
  CHECK_FALSE(c.sqrt_response);
  CHECK(c.n_y == 1.0);
  CHECK(c.blend.alpha == 0.5);
  CHECK(c.train.epochs == 10000);
  CHECK(c.train.stride == 50);
  CHECK(c.pred_quantiles == std::vector<double>{0.5, 0.95, 0.99});
  RunConfig back = evreg::parse_run_config(evreg::config_echo(c));
  CHECK(evreg::config_echo(back) == evreg::config_echo(c));
}

TEST_CASE("unknown keys and bad spellings are named") {
  CHECK_THROWS_WITH_AS(evreg::parse_run_config(R"({"task": "simulate",
      "simulate": {"study": "b1_case1", "n": 5, "seed": 1}, "wrkers": 2})"),
                       doctest::Contains("wrkers"), std::runtime_error);
  CHECK_THROWS_WITH_AS(evreg::parse_run_config(R"({"task": "simulate",
      "simulate": {"study": "b1_case1", "n": 5, "sed": 1}})"),
                       doctest::Contains("simulate: unknown key 'sed'"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(evreg::parse_run_config(R"({"task": "nope"})"),
                       doctest::Contains("unknown task 'nope'"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(evreg::parse_run_config(R"({"task": "simulate",
      "simulate": {"study": "b9", "n": 5}})"),
                       doctest::Contains("unknown study 'b9'"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(evreg::parse_run_config(R"({"task": "simulate",
      "simulate": {"study": "b1_case1", "n": 5}, "train": {"selection": "best"}})"),
                       doctest::Contains("unknown selection 'best'"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(evreg::parse_run_config("{"), doctest::Contains("JSON"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(evreg::parse_run_config(R"({"task": "simulate",
      "simulate": {"study": "b1_case1", "n": 5}, "workers": "two"})"),
                       doctest::Contains("workers"), std::runtime_error);
}

TEST_CASE("structural validation rejects inconsistent settings") {
  auto fit_base = [](const std::string& extra) {
    return std::string(R"({"task": "bgev_pp", "dataset": "d.tsv",
        "model": {"surfaces": [{"name": "q"}, {"name": "s"}]})") +
           extra + "}";
  };
  CHECK_NOTHROW(evreg::parse_run_config(fit_base("")));
  CHECK_THROWS_WITH_AS(evreg::parse_run_config(fit_base(
                           R"(, "pp": {"p_u": 1.5})")),
                       doctest::Contains("p_u"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      evreg::parse_run_config(fit_base(
          R"(, "folds": {"k": 3}, "split": {"train_fraction": 0.8})")),
      doctest::Contains("both"), std::runtime_error);
  CHECK_THROWS_WITH_AS(evreg::parse_run_config(fit_base(
                           R"(, "folds": {"k": 3, "validation_fold": 3})")),
                       doctest::Contains("validation_fold"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(evreg::parse_run_config(fit_base(
                           R"(, "pred_quantiles": [0.9, 0.5])")),
                       doctest::Contains("increase"), std::runtime_error);

  // Surface-level problems.
  CHECK_THROWS_WITH_AS(
      evreg::parse_run_config(
          R"({"task": "bgev_pp", "dataset": "d", "model": {"surfaces": [
             {"name": "q", "net": ["a"]}]}})"),
      doctest::Contains("declared together"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      evreg::parse_run_config(
          R"({"task": "bgev_pp", "dataset": "d", "model": {"surfaces": [
             {"name": "q", "linear": ["a"], "additive": ["a"], "knots": 10}]}})"),
      doctest::Contains("more than one component"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      evreg::parse_run_config(
          R"({"task": "bgev_pp", "dataset": "d", "model": {"surfaces": [
             {"name": "q", "additive": ["a", "b"], "lambda": [1, 2, 3], "knots": 10}]}})"),
      doctest::Contains("lambda"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      evreg::parse_run_config(
          R"({"task": "bgev_pp", "dataset": "d", "model": {"surfaces": [
             {"name": "q"}, {"name": "q"}]}})"),
      doctest::Contains("duplicate surface"), std::runtime_error);

  // Task prerequisites.
  CHECK_THROWS_WITH_AS(evreg::parse_run_config(R"({"task": "bgev_pp"})"),
                       doctest::Contains("needs a dataset"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(
      evreg::parse_run_config(R"({"task": "predict", "dataset": "d",
          "model": {"surfaces": [{"name": "q"}]}})"),
      doctest::Contains("checkpoint_in"), std::runtime_error);
  CHECK_THROWS_WITH_AS(evreg::parse_run_config(R"({"task": "simulate"})"),
                       doctest::Contains("simulate.n"), std::runtime_error);
}

TEST_CASE("sweep axis rules") {
  auto sweep_cfg = [](const std::string& body) {
    return std::string(R"({"task": "sweep", "dataset": "d.tsv",
        "model": {"surfaces": [{"name": "q"}, {"name": "s"}]},
        "sweep": {)") + body + "}}";
  };
  RunConfig c = evreg::parse_run_config(sweep_cfg(
      R"("forms": ["linear", "nn", "linear+gam+nn"],
         "interpreted": ["a", "b", "c"],
         "linear_pick": [["a", "b"], ["c"]])"));
  CHECK(c.sweep.enabled);
  CHECK(c.sweep.forms.size() == 3);
  CHECK(c.sweep.linear_pick[1] == std::vector<std::string>{"c"});
  RunConfig back = evreg::parse_run_config(evreg::config_echo(c));
  CHECK(evreg::config_echo(back) == evreg::config_echo(c));

  CHECK_NOTHROW(evreg::parse_run_config(sweep_cfg(R"("p_u": [0.9, 0.95, 0.99])")));
  RunConfig a = evreg::parse_run_config(sweep_cfg(
      R"("architectures": [{"name": "wide", "layers": [{"width": 16}, {"width": 8}]}])"));
  CHECK(a.sweep.architectures.size() == 1);
  CHECK(a.sweep.architectures[0].second[0].width == 16);

  CHECK_THROWS_WITH_AS(evreg::parse_run_config(sweep_cfg("")),
                       doctest::Contains("exactly one"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      evreg::parse_run_config(sweep_cfg(R"("forms": ["nn"], "p_u": [0.9])")),
      doctest::Contains("exactly one"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      evreg::parse_run_config(sweep_cfg(R"("forms": ["deep"])")),
      doctest::Contains("unknown sweep form"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      evreg::parse_run_config(sweep_cfg(R"("forms": ["linear+nn"])")),
      doctest::Contains("interpreted"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      evreg::parse_run_config(sweep_cfg(
          R"("forms": ["linear+gam"], "interpreted": ["a"])")),
      doctest::Contains("linear_pick"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      evreg::parse_run_config(sweep_cfg(
          R"("forms": ["linear+gam"], "interpreted": ["a"],
             "linear_pick": [["z"], []])")),
      doctest::Contains("'z'"), std::runtime_error);
}

TEST_CASE("predictor-name resolution against a dataset header") {
  RunConfig c = rich();
  const std::vector<std::string> names = {"fwi", "t2m", "rh", "alt", "slope"};
  evreg::ModelSpec m = evreg::resolve_model(c, names);
  CHECK(m.surfaces.size() == 2);
  CHECK(m.surfaces[0].linear == std::vector<int>{3});
  CHECK(m.surfaces[0].additive == std::vector<int>{0});
  CHECK(m.surfaces[0].net == std::vector<int>{1, 2});
  CHECK(m.surfaces[0].knots == 12);
  CHECK(m.surfaces[0].link == evreg::Link::identity);
  CHECK(m.surfaces[1].link == evreg::Link::exponential);
  CHECK(m.surfaces[1].linear == std::vector<int>{0, 3});
  CHECK(m.shared_xi);
  CHECK(m.xi_init == 0.25);

  CHECK_THROWS_WITH_AS(evreg::resolve_model(c, {"fwi", "alt"}),
                       doctest::Contains("surface 'q': unknown predictor 't2m'"),
                       std::runtime_error);
}

TEST_CASE("enum name helpers are inverses") {
  for (auto link : {evreg::Link::identity, evreg::Link::exponential,
                    evreg::Link::logistic})
    CHECK(evreg::link_from_name(evreg::link_name(link)) == link);
  for (auto s : {evreg::Study::b1_case1, evreg::Study::b1_case2,
                 evreg::Study::b2_lognormal, evreg::Study::b2_gpd,
                 evreg::Study::b3_linear, evreg::Study::b3_additive,
                 evreg::Study::b3_nonlinear})
    CHECK(evreg::study_from_name(evreg::study_name(s)) == s);
  CHECK_THROWS_AS(evreg::link_from_name("log"), std::runtime_error);
}
