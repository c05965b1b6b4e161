#include "doctest.h"

#include <sstream>

#include "rsm/errors.hpp"
#include "rsm/harness.hpp"

using namespace rsm;
using namespace rsm::harness;

namespace {

ExperimentConfig small_config(Model model, const std::string& task = "latch") {
    ExperimentConfig cfg;
    cfg.task = task;
    cfg.model = model;
    cfg.neurons = 24;
    cfg.repeats = 2;
    cfg.search_budget = 2;
    cfg.validation_sets = 1;
    cfg.seed = 3;
    cfg.task_options.train_count = 12;
    cfg.task_options.test_count = 6;
    cfg.task_options.train_window = {1, 12};
    cfg.task_options.test_window = {12, 20};
    return cfg;
}

}  // namespace

TEST_CASE("mean absolute error") {
    Eigen::MatrixXd a(2, 1), b(2, 1);
    a << 0, 1;
    b << 1, 1;
    CHECK(mae(a, b) == doctest::Approx(0.5));
    CHECK(mae(b, b) == 0.0);
    CHECK(mae(Eigen::MatrixXd::Zero(5, 1), Eigen::MatrixXd::Ones(5, 1)) == doctest::Approx(1.0));
    CHECK_THROWS_AS(mae(a, Eigen::MatrixXd::Zero(3, 1)), DimensionError);
    // Per-sequence means are averaged, so short sequences weigh as much as long ones.
    CHECK(dataset_mae({a, Eigen::MatrixXd::Zero(4, 1)}, {b, Eigen::MatrixXd::Zero(4, 1)}) == doctest::Approx(0.25));
}

TEST_CASE("model names") {
    for (Model m : all_models()) CHECK(model_from_string(to_string(m)) == m);
    CHECK(model_from_string("LDN-rsm") == Model::ldn_rsm);
    CHECK(to_string(Model::crj_esn) == "crj-ESN");
    CHECK(is_rsm(Model::rand_rsm));
    CHECK_FALSE(is_rsm(Model::rmm_probe));
    CHECK_THROWS_AS(model_from_string("lstm"), ConfigurationError);
}

TEST_CASE("neuron defaults and LDN trimming") {
    ExperimentConfig cfg;
    cfg.task = "copy";
    cfg.model = Model::ldn_rsm;
    CHECK(cfg.resolved_neurons() == 512);
    cfg.model = Model::ldn_esn;
    CHECK(cfg.resolved_neurons() == 256);
    cfg.task = "dyck1";
    cfg.model = Model::ldn_rsm;
    CHECK(cfg.resolved_neurons() == 256);
    CHECK(effective_neurons(ReservoirKind::ldn, 256, 3) == 255);
    CHECK(effective_neurons(ReservoirKind::rand, 256, 3) == 256);
}

TEST_CASE("random configurations respect the search space") {
    const SearchSpace space;
    tasks::Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const auto rnd = draw_hyperparameters(ReservoirKind::rand, 64, space, rng);
        CHECK(rnd.spectral_radius >= space.radius_min);
        CHECK(rnd.spectral_radius <= space.radius_max);
        CHECK(rnd.classifier_regularization >= space.classifier_reg_min);
        CHECK(rnd.classifier_regularization <= space.classifier_reg_max);
        CHECK(rnd.kernel_width_factor >= space.width_min);
        CHECK(rnd.kernel_width_factor <= space.width_max);
        const auto crj = draw_hyperparameters(ReservoirKind::crj, 64, space, rng);
        CHECK(crj.jump_length >= 2);
        CHECK(crj.jump_length <= 32);
        CHECK(build_reservoir(crj, 64, 3, 1).spectral_radius() < 1.0);
        const auto ldn = draw_hyperparameters(ReservoirKind::ldn, 64, space, rng);
        CHECK(ldn.theta >= space.theta_min);
        CHECK(ldn.theta <= space.theta_max);
    }
    CHECK(SearchSpace::for_task("copy").theta_min > SearchSpace::for_task("dyck1").theta_max - 1e-12);
}

TEST_CASE("hyperparameters survive JSON") {
    Hyperparameters hp;
    hp.kind = ReservoirKind::crj;
    hp.cycle_weight = 0.3;
    hp.jump_length = 5;
    hp.kernel_width_factor = 0.2;
    const auto back = Hyperparameters::from_json(json::parse(hp.to_json().dump()));
    CHECK(back.kind == hp.kind);
    CHECK(back.cycle_weight == hp.cycle_weight);
    CHECK(back.jump_length == hp.jump_length);
    CHECK(back.kernel_width_factor == hp.kernel_width_factor);
    CHECK(back.to_json() == hp.to_json());
}

TEST_CASE("a budget of one returns its only draw") {
    auto cfg = small_config(Model::rand_esn);
    cfg.search_budget = 1;
    const auto res = hyperparameter_search(cfg);
    REQUIRE(res.trials.size() == 1);
    CHECK(res.best.to_json() == res.trials[0].hp.to_json());
    CHECK(res.best_mae == res.trials[0].mae);
}

TEST_CASE("search keeps the lowest validation error and is reproducible") {
    auto cfg = small_config(Model::ldn_rsm);
    cfg.search_budget = 3;
    const auto a = hyperparameter_search(cfg);
    const auto b = hyperparameter_search(cfg);
    REQUIRE(a.trials.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.trials[i].mae == b.trials[i].mae);
        CHECK(a.best_mae <= a.trials[i].mae);
    }
    CHECK(a.best.to_json() == b.best.to_json());
}

TEST_CASE("experiments write reproducible CSV") {
    auto cfg = small_config(Model::crj_rsm, "dyck1");
    cfg.repeats = 1;
    cfg.measure_fidelity = true;
    const auto rows = run_experiment(cfg);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].fidelity.has_value());
    CHECK(rows[0].fidelity->decisions > 0);
    CHECK(rows[0].model == "crj-RSM");
    CHECK(rows[0].task == "dyck1");
    CHECK(rows[0].mae >= 0.0);
    CHECK(rows[0].train_seconds > 0.0);

    std::ostringstream first, second;
    write_csv(first, rows, false);
    write_csv(second, run_experiment(cfg), false);
    CHECK(first.str() == second.str());
    CHECK(first.str().rfind("model,task,repeat,mae,train_seconds,hyperparameters\n", 0) == 0);
}

TEST_CASE("fixed hyperparameters skip the search") {
    auto cfg = small_config(Model::rand_rsm, "copy");
    cfg.task_options.copy_length = {1, 5};
    Hyperparameters hp;
    hp.kind = ReservoirKind::rand;
    hp.spectral_radius = 0.7;
    cfg.fixed = hp;
    SearchResult search;
    const auto rows = run_experiment(cfg, &search);
    CHECK(rows.size() == 2);
    CHECK(search.trials.empty());
    for (const auto& r : rows) {
        CHECK(r.hp.spectral_radius == 0.7);
        CHECK_FALSE(r.fidelity.has_value());
    }
}

TEST_CASE("the memory-machine probe runs through the harness") {
    auto cfg = small_config(Model::rmm_probe, "palindrome");
    cfg.task_options.train_window = {1, 21};
    cfg.task_options.test_window = {21, 41};
    cfg.search_budget = 1;
    cfg.repeats = 1;
    const auto rows = run_experiment(cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mae > 0.0);
}

TEST_CASE("separability of a reservoir that only remembers the last input") {
    const auto table = SymbolTable::one_hot({"a", "b", "S"}, {});
    const Reservoir id(Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Zero(3, 3), Activation::identity);
    const auto rep = separability_report(id, 4, table);
    CHECK(rep.words == 3 + 9 + 27 + 81);
    CHECK(rep.exhaustive);
    CHECK(rep.overall == 1.0);
    for (double acc : rep.accuracy) CHECK(acc == 1.0);
    CHECK(rep.projection.rows() == rep.words);
    CHECK(rep.projection.cols() == 2);

    const auto single = SymbolTable::one_hot({"a"}, {});
    const Reservoir one(Eigen::MatrixXd::Ones(2, 1), Eigen::MatrixXd::Zero(2, 2), Activation::identity);
    CHECK(separability_report(one, 3, single).overall == 1.0);

    std::ostringstream csv;
    write_projection_csv(csv, rep);
    CHECK(csv.str().rfind("x,y,symbol\n", 0) == 0);
}

TEST_CASE("the example cycle reservoir") {
    const auto r = example_crj();
    CHECK(r.neurons() == 5);
    CHECK(r.inputs() == 3);
    CHECK(r.kind() == ReservoirKind::crj);
    CHECK(r.spectral_radius() < 1.0);
    CHECK(r.input_weights().cwiseAbs().isOnes());
}
