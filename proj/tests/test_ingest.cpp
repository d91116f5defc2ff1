#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "moxgate/dataset_io.hpp"
#include "moxgate/errors.hpp"
#include "moxgate/omics.hpp"
#include "support/tmpdir.hpp"

using namespace moxgate;
namespace ts = moxgate::testsupport;

namespace {

OmicsMatrix make_matrix(std::string modality, std::vector<std::string> samples,
                        std::vector<std::string> features, std::vector<double> values,
                        std::vector<std::uint8_t> missing = {}) {
    OmicsMatrix m;
    m.modality = std::move(modality);
    m.sample_ids = std::move(samples);
    m.feature_ids = std::move(features);
    m.values = std::move(values);
    m.missing = missing.empty() ? std::vector<std::uint8_t>(m.values.size(), 0)
                                : std::move(missing);
    return m;
}

}  // namespace

TEST_CASE("load_matrix: NA cell sets exactly one missing flag") {
    ts::TempDir dir("ingest");
    const std::string path = dir.write("m.tsv",
                                       "id\tf1\tf2\n"
                                       "s1\t1.0\t2.0\n"
                                       "s2\tNA\t4.0\n"
                                       "s3\t5.0\t6.0\n");
    OmicsMatrix m = load_matrix(path, Orientation::samples_in_rows);
    CHECK(m.num_samples() == 3);
    CHECK(m.num_features() == 2);
    CHECK(m.missing_count() == 1);
    CHECK(m.is_missing(1, 0));
    CHECK(m.at(2, 1) == 6.0);
}

TEST_CASE("load_matrix: missing tokens are case-insensitive, empty cells count") {
    ts::TempDir dir("ingest");
    const std::string path = dir.write("m.tsv",
                                       "id\tf1\tf2\tf3\n"
                                       "s1\tnan\t\tNa\n");
    OmicsMatrix m = load_matrix(path, Orientation::samples_in_rows);
    CHECK(m.missing_count() == 3);
}

TEST_CASE("load_matrix: header-only file is a format error") {
    ts::TempDir dir("ingest");
    const std::string path = dir.write("m.tsv", "id\tf1\tf2\n");
    CHECK_THROWS_AS(load_matrix(path, Orientation::samples_in_rows), FormatError);
    const std::string empty = dir.write("e.tsv", "");
    CHECK_THROWS_AS(load_matrix(empty, Orientation::samples_in_rows), FormatError);
}

TEST_CASE("load_matrix: duplicate sample ID names the offender") {
    ts::TempDir dir("ingest");
    const std::string path = dir.write("m.tsv",
                                       "id\tf1\n"
                                       "dup\t1\n"
                                       "dup\t2\n");
    CHECK_THROWS_WITH_AS(load_matrix(path, Orientation::samples_in_rows),
                         doctest::Contains("dup"), FormatError);
}

TEST_CASE("load_matrix: ragged row reports the line number") {
    ts::TempDir dir("ingest");
    const std::string path = dir.write("m.tsv",
                                       "id\tf1\tf2\n"
                                       "s1\t1\t2\n"
                                       "s2\t3\n");
    CHECK_THROWS_WITH_AS(load_matrix(path, Orientation::samples_in_rows),
                         doctest::Contains("line 3"), FormatError);
}

TEST_CASE("load_matrix: unparsable value is a format error with line number") {
    ts::TempDir dir("ingest");
    const std::string path = dir.write("m.tsv",
                                       "id\tf1\n"
                                       "s1\tbogus\n");
    CHECK_THROWS_WITH_AS(load_matrix(path, Orientation::samples_in_rows),
                         doctest::Contains("line 2"), FormatError);
}

TEST_CASE("load_matrix: features-in-rows orientation transposes") {
    ts::TempDir dir("ingest");
    const std::string path = dir.write("m.tsv",
                                       "feature\ts1\ts2\n"
                                       "f1\t1\t2\n"
                                       "f2\t3\tNA\n"
                                       "f3\t5\t6\n");
    OmicsMatrix m = load_matrix(path, Orientation::features_in_rows);
    CHECK(m.num_samples() == 2);
    CHECK(m.num_features() == 3);
    CHECK(m.at(0, 0) == 1.0);
    CHECK(m.at(1, 0) == 2.0);
    CHECK(m.at(0, 2) == 5.0);
    CHECK(m.is_missing(1, 1));
}

TEST_CASE("load_matrix: comma delimiter") {
    ts::TempDir dir("ingest");
    const std::string path = dir.write("m.csv",
                                       "id,f1,f2\n"
                                       "s1,1.5,2.5\n");
    OmicsMatrix m = load_matrix(path, Orientation::samples_in_rows, ',');
    CHECK(m.at(0, 1) == 2.5);
}

TEST_CASE("drop_sparse_features: strict inequality at the threshold") {
    // One feature missing in 5/10 samples, another in exactly 4/10.
    std::vector<double> values(10 * 2, 1.0);
    std::vector<std::uint8_t> missing(10 * 2, 0);
    for (int s = 0; s < 5; ++s) missing[s * 2] = 1;      // f_half: 50%
    for (int s = 0; s < 4; ++s) missing[s * 2 + 1] = 1;  // f_forty: 40%
    OmicsMatrix m = make_matrix("gene", {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"},
                                {"f_half", "f_forty"}, values, missing);

    OmicsMatrix dropped = drop_sparse_features(m, 0.4);
    REQUIRE(dropped.num_features() == 1);
    CHECK(dropped.feature_ids[0] == "f_forty");  // exactly 40% is retained
    CHECK(dropped.num_samples() == 10);

    OmicsMatrix keep_all = drop_sparse_features(m, 1.0);
    CHECK(keep_all.num_features() == 2);

    CHECK_THROWS_AS(drop_sparse_features(m, 1.5), ValueError);
}

TEST_CASE("impute_median: odd, tie, and even observed counts") {
    // Observed {1, 3}: median is the midpoint 2.
    OmicsMatrix two = make_matrix("gene", {"s1", "s2", "s3"}, {"f"},
                                  {1, 0, 3}, {0, 1, 0});
    CHECK(impute_median(two).at(1, 0) == 2.0);

    // Observed {5, 5}: median 5.
    OmicsMatrix tie = make_matrix("gene", {"s1", "s2", "s3"}, {"f"},
                                  {5, 5, 0}, {0, 0, 1});
    CHECK(impute_median(tie).at(2, 0) == 5.0);

    // Observed {1, 2, 4}: odd count selects the middle value 2, not the
    // midpoint 3 of the central pair {2, 4}.
    OmicsMatrix odd = make_matrix("gene", {"s1", "s2", "s3", "s4"}, {"f"},
                                  {1, 2, 4, 0}, {0, 0, 0, 1});
    CHECK(impute_median(odd).at(3, 0) == 2.0);

    // Even observed count takes the midpoint of the central pair.
    OmicsMatrix even = make_matrix("gene", {"s1", "s2", "s3", "s4", "s5"}, {"f"},
                                   {1, 2, 4, 7, 0}, {0, 0, 0, 0, 1});
    CHECK(impute_median(even).at(4, 0) == 3.0);  // median of {1,2,4,7}

    OmicsMatrix multi = make_matrix("gene", {"s1", "s2", "s3"}, {"f1", "f2"},
                                    {1, 9, 0, 9, 3, 0}, {0, 0, 1, 0, 0, 1});
    OmicsMatrix out = impute_median(multi);
    CHECK(out.missing_count() == 0);
    CHECK(out.at(1, 0) == 2.0);  // f1 observed {1, 3}
    CHECK(out.at(2, 1) == 9.0);  // f2 observed {9, 9}

    OmicsMatrix hopeless = make_matrix("gene", {"s1", "s2"}, {"void"}, {0, 0}, {1, 1});
    CHECK_THROWS_WITH_AS(impute_median(hopeless), doctest::Contains("void"), DataError);
}

TEST_CASE("pipeline idempotence: drop then impute leaves zero missing") {
    std::vector<double> values(6 * 3, 2.0);
    std::vector<std::uint8_t> missing(6 * 3, 0);
    missing[0 * 3 + 0] = missing[1 * 3 + 0] = missing[2 * 3 + 0] = missing[3 * 3 + 0] = 1;
    missing[0 * 3 + 1] = 1;
    OmicsMatrix m = make_matrix("x", {"a", "b", "c", "d", "e", "f"}, {"f1", "f2", "f3"},
                                values, missing);
    OmicsMatrix processed = impute_median(drop_sparse_features(m, 0.4));
    CHECK(processed.missing_count() == 0);
    CHECK(processed.num_features() == 2);  // f1 at 4/6 > 0.4 dropped
}

TEST_CASE("intersect_features: shared set, canonical order, errors") {
    OmicsMatrix a = make_matrix("gene", {"s1"}, {"a", "b", "c"}, {1, 2, 3});
    OmicsMatrix b = make_matrix("gene", {"s2"}, {"d", "c", "b"}, {4, 5, 6});
    std::vector<OmicsMatrix> in{a, b};
    std::vector<OmicsMatrix> out = intersect_features(in);
    REQUIRE(out.size() == 2);
    CHECK(out[0].feature_ids == std::vector<std::string>{"b", "c"});
    CHECK(out[1].feature_ids == out[0].feature_ids);
    CHECK(out[0].at(0, 0) == 2.0);
    CHECK(out[1].at(0, 0) == 6.0);  // b column of the second matrix
    CHECK(out[1].at(0, 1) == 5.0);

    // Identical feature sets come back unchanged up to canonical order.
    OmicsMatrix c = make_matrix("gene", {"s3"}, {"c", "a", "b"}, {9, 7, 8});
    std::vector<OmicsMatrix> same{a, c};
    std::vector<OmicsMatrix> sorted = intersect_features(same);
    CHECK(sorted[0].feature_ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(sorted[1].at(0, 0) == 7.0);
    CHECK(sorted[1].at(0, 2) == 9.0);

    OmicsMatrix disjoint = make_matrix("gene", {"s4"}, {"z"}, {1});
    std::vector<OmicsMatrix> bad{a, disjoint};
    CHECK_THROWS_AS(intersect_features(bad), DataError);

    std::vector<OmicsMatrix> one{a};
    CHECK_THROWS_AS(intersect_features(one), ValueError);

    OmicsMatrix other = make_matrix("mirna", {"s5"}, {"a"}, {1});
    std::vector<OmicsMatrix> mixed{a, other};
    CHECK_THROWS_AS(intersect_features(mixed), ValueError);
}

TEST_CASE("make_splits: balanced 5-class arithmetic and held-out cohort") {
    LabelTable t;
    for (int c = 0; c < 5; ++c) {
        for (int i = 0; i < 20; ++i) {
            t.sample_ids.push_back("s" + std::to_string(c) + "_" + std::to_string(i));
            t.cohort.push_back(i % 2 == 0 ? "COAD" : "STAD");
            t.subtype.push_back("class" + std::to_string(c));
        }
    }
    for (int i = 0; i < 10; ++i) {
        t.sample_ids.push_back("esca" + std::to_string(i));
        t.cohort.push_back("ESCA");
        t.subtype.push_back("class" + std::to_string(i % 5));
    }

    SplitSpec spec;
    spec.held_out_cohorts = {"ESCA"};
    spec.validation_fraction = 0.1;
    spec.seed = 7;
    std::vector<Split> split = make_splits(t, spec);

    std::size_t train = 0, val = 0, test = 0;
    std::map<std::string, int> val_per_class;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (split[i] == Split::train) ++train;
        if (split[i] == Split::val) {
            ++val;
            ++val_per_class[t.subtype[i]];
        }
        if (split[i] == Split::test) {
            ++test;
            CHECK(t.cohort[i] == "ESCA");
        }
    }
    CHECK(train == 90);
    CHECK(val == 10);
    CHECK(test == 10);
    for (const auto& [cls, n] : val_per_class) CHECK(n == 2);

    // Every ESCA sample is tagged test.
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t.cohort[i] == "ESCA") CHECK(split[i] == Split::test);
    }

    // Determinism under the seed.
    CHECK(make_splits(t, spec) == split);
}

TEST_CASE("make_splits: class with fewer than 2 eligible samples errors") {
    LabelTable t;
    t.sample_ids = {"a", "b", "c"};
    t.cohort = {"X", "X", "HOLD"};
    t.subtype = {"only", "other", "other"};
    SplitSpec spec;
    spec.held_out_cohorts = {"HOLD"};
    spec.validation_fraction = 0.5;
    CHECK_THROWS_AS(make_splits(t, spec), DataError);

    // A class confined to the held-out cohort is also an error.
    LabelTable h;
    h.sample_ids = {"a", "b", "c", "d", "e"};
    h.cohort = {"X", "X", "X", "X", "HOLD"};
    h.subtype = {"u", "u", "v", "v", "ghost"};
    CHECK_THROWS_AS(make_splits(h, spec), DataError);
}

namespace {

AlignedDataset toy_dataset() {
    AlignedDataset d;
    d.sample_ids = {"t1", "t2", "v1", "e1"};
    d.cohorts = {"A", "A", "A", "B"};
    d.labels = {0, 1, 0, 1};
    d.class_names = {"x", "y"};
    d.split = {Split::train, Split::train, Split::val, Split::test};
    ModalityBlock block;
    block.label = "gene";
    block.num_features = 2;
    block.values = {0.0, 5.0,   // t1
                    2.0, 5.0,   // t2
                    1.0, 7.0,   // v1
                    9.0, 5.0};  // e1
    d.modalities.push_back(block);
    return d;
}

}  // namespace

TEST_CASE("standardize: train stats, degenerate sigma, and no leakage") {
    AlignedDataset d = toy_dataset();
    AlignedDataset z = standardize(d);

    // Train values [0, 2]: mean 1, population sigma 1 -> [-1, +1].
    CHECK(z.modalities[0].values[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(z.modalities[0].values[2] == doctest::Approx(1.0).epsilon(1e-12));
    // Validation value equal to the train mean maps to 0.
    CHECK(z.modalities[0].values[4] == doctest::Approx(0.0).epsilon(1e-12));
    // Constant train feature maps to all zeros everywhere.
    CHECK(z.modalities[0].values[1] == 0.0);
    CHECK(z.modalities[0].values[3] == 0.0);
    CHECK(z.modalities[0].values[5] == 0.0);
    CHECK(z.modalities[0].values[7] == 0.0);
    // Test row transformed with train statistics: (9 - 1) / 1 = 8.
    CHECK(z.modalities[0].values[6] == doctest::Approx(8.0).epsilon(1e-12));

    // Removing the test row leaves the statistics untouched.
    AlignedDataset no_test = d;
    no_test.sample_ids.pop_back();
    no_test.cohorts.pop_back();
    no_test.labels.pop_back();
    no_test.split.pop_back();
    no_test.modalities[0].values.resize(6);
    AlignedDataset z2 = standardize(no_test);
    CHECK(z2.stats[0].mean == z.stats[0].mean);
    CHECK(z2.stats[0].stddev == z.stats[0].stddev);
}

TEST_CASE("build_dataset: full pipeline over a two-cohort fixture") {
    std::vector<std::vector<OmicsMatrix>> input;
    // Modality "gene": cohortA has features {g1,g2,g3}, cohortB {g2,g3,g4}.
    OmicsMatrix ga = make_matrix("gene", {"a1", "a2", "a3", "a4"}, {"g1", "g2", "g3"},
                                 {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    OmicsMatrix gb = make_matrix("gene", {"b1", "b2"}, {"g2", "g3", "g4"},
                                 {1, 2, 3, 4, 5, 6});
    input.push_back({ga, gb});
    // Modality "mirna": single study-wide file, unsorted features.
    OmicsMatrix mi = make_matrix("mirna", {"a1", "a2", "a3", "a4", "b1", "b2"},
                                 {"m2", "m1"},
                                 {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    input.push_back({mi});

    LabelTable labels;
    labels.sample_ids = {"a1", "a2", "a3", "a4", "b1", "b2"};
    labels.cohort = {"A", "A", "A", "A", "B", "B"};
    labels.subtype = {"y", "x", "x", "y", "x", "y"};

    PipelineConfig cfg;
    cfg.split.held_out_cohorts = {"B"};
    cfg.split.validation_fraction = 0.5;
    cfg.split.seed = 3;

    PipelineResult result = build_dataset(input, labels, cfg);
    const AlignedDataset& d = result.dataset;

    CHECK(d.sample_ids == std::vector<std::string>{"a1", "a2", "a3", "a4", "b1", "b2"});
    CHECK(d.class_names == std::vector<std::string>{"x", "y"});
    CHECK(d.labels == std::vector<int>{1, 0, 0, 1, 0, 1});
    CHECK(d.modalities[0].label == "gene");
    CHECK(d.modalities[0].num_features == 2);  // {g2, g3}
    CHECK(d.modalities[1].num_features == 2);  // {m1, m2} canonical order
    CHECK(result.stage_counts[0].loaded == std::vector<std::size_t>{3, 3});
    CHECK(result.stage_counts[0].after_intersect == 2);
    CHECK(result.stage_counts[1].after_intersect == 2);

    CHECK(d.split[4] == Split::test);
    CHECK(d.split[5] == Split::test);
    std::size_t train = 0, val = 0;
    for (Split s : d.split) {
        if (s == Split::train) ++train;
        if (s == Split::val) ++val;
    }
    CHECK(train == 2);
    CHECK(val == 2);

    // Split partition: every sample carries exactly one tag by construction;
    // verify coverage.
    CHECK(train + val + d.indices_of(Split::test).size() == d.num_samples());
}

TEST_CASE("dataset JSON round trip is bit-exact") {
    AlignedDataset d = standardize(toy_dataset());
    d.modalities[0].values[0] = 0.1 + 0.2;  // a value without a short decimal form
    ts::TempDir dir("io");
    const std::string path = dir.file("d.json");
    save_dataset(path, d);
    AlignedDataset loaded = load_dataset_file(path);
    CHECK(loaded.sample_ids == d.sample_ids);
    CHECK(loaded.labels == d.labels);
    CHECK(loaded.split == d.split);
    REQUIRE(loaded.modalities.size() == d.modalities.size());
    for (std::size_t i = 0; i < loaded.modalities[0].values.size(); ++i) {
        CHECK(loaded.modalities[0].values[i] == d.modalities[0].values[i]);
    }
    CHECK(loaded.stats[0].mean == d.stats[0].mean);
    CHECK(loaded.stats[0].stddev == d.stats[0].stddev);
}

TEST_CASE("manifest round trip re-runs the pipeline bit-exactly") {
    ts::TempDir dir("manifest");
    dir.write("gene_a.tsv",
              "id\tg1\tg2\tg3\n"
              "a1\t1\t2\t3\n"
              "a2\t4\tNA\t6\n"
              "a3\t7\t8\t9\n"
              "a4\t10\t11\t12\n");
    dir.write("gene_b.tsv",
              "id\tg2\tg3\tg4\n"
              "b1\t1\t2\t3\n"
              "b2\t4\t5\t6\n");
    dir.write("labels.tsv",
              "sample_id\tcohort\tsubtype\n"
              "a1\tA\ty\n"
              "a2\tA\tx\n"
              "a3\tA\tx\n"
              "a4\tA\ty\n"
              "b1\tB\tx\n"
              "b2\tB\ty\n");

    DataSourceConfig src;
    src.modalities.push_back({"gene", {dir.file("gene_a.tsv"), dir.file("gene_b.tsv")},
                              Orientation::samples_in_rows});
    src.labels_file = dir.file("labels.tsv");
    src.pipeline.split.held_out_cohorts = {"B"};
    src.pipeline.split.validation_fraction = 0.5;
    src.pipeline.split.seed = 11;

    PipelineResult result = run_pipeline(src);
    const std::string manifest = dir.file("manifest.json");
    save_manifest(manifest, src, result);

    AlignedDataset reloaded = load_from_manifest(manifest);
    CHECK(reloaded.sample_ids == result.dataset.sample_ids);
    CHECK(reloaded.split == result.dataset.split);
    CHECK(reloaded.modalities[0].values == result.dataset.modalities[0].values);

    // Tampering with a source file must be detected.
    dir.write("labels.tsv",
              "sample_id\tcohort\tsubtype\n"
              "a1\tA\tx\n"
              "a2\tA\tx\n"
              "a3\tA\ty\n"
              "a4\tA\ty\n"
              "b1\tB\tx\n"
              "b2\tB\ty\n");
    CHECK_THROWS_AS(load_from_manifest(manifest), DataError);
}

TEST_CASE("TSV export feeds back through the ingest pipeline") {
    AlignedDataset d = toy_dataset();
    ts::TempDir dir("export");
    export_dataset_tsv(d, dir.path().string());

    OmicsMatrix m = load_matrix(dir.file("gene.tsv"), Orientation::samples_in_rows);
    CHECK(m.num_samples() == 4);
    CHECK(m.num_features() == 2);
    CHECK(m.at(3, 0) == 9.0);
    LabelTable t = load_labels(dir.file("labels.tsv"));
    CHECK(t.size() == 4);
    CHECK(t.subtype[1] == "y");
}
