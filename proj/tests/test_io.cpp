#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "polarseg/config.hpp"
#include "polarseg/image.hpp"
#include "polarseg/mnet.hpp"
#include "polarseg/weights_io.hpp"

using namespace polarseg;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("weight container round-trips bit-exactly") {
    MNet net = build_mnet([] {
        MNetConfig cfg;
        cfg.depth = 3;
        cfg.base_channels = 4;
        cfg.input_size = 32;
        return cfg;
    }());
    init_parameters(net.graph, 1234);

    TempFile f("weights_roundtrip_test.bin");
    save_parameters(f.path, net.graph.params());
    const auto loaded = load_parameters(f.path);
    REQUIRE(loaded.size() == net.graph.params().size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        const Parameter& p = net.graph.params()[i];
        CHECK(loaded[i].name == p.name);
        CHECK(static_cast<int>(loaded[i].dims.size()) == p.rank);
        REQUIRE(loaded[i].data.size() == p.value.size());
        for (std::size_t j = 0; j < p.value.size(); ++j)
            CHECK(loaded[i].data[j] == p.value.data[j]);
    }

    // applying onto a freshly built graph reproduces the values
    MNet other = build_mnet(net.cfg);
    apply_parameters(other.graph, loaded);
    for (std::size_t i = 0; i < loaded.size(); ++i)
        CHECK(other.graph.params()[i].value.data == net.graph.params()[i].value.data);

    // the file itself is byte-stable across saves
    TempFile g("weights_roundtrip_test2.bin");
    save_parameters(g.path, other.graph.params());
    std::ifstream a(f.path, std::ios::binary), b(g.path, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
    CHECK(bytes_a == bytes_b);
}

TEST_CASE("corrupt magic is rejected mentioning MNETW1") {
    TempFile f("weights_badmagic_test.bin");
    std::ofstream out(f.path, std::ios::binary);
    out << "NOPE!!then some garbage";
    out.close();
    CHECK_THROWS_WITH_AS(load_parameters(f.path), doctest::Contains("MNETW1"),
                         std::runtime_error);
}

TEST_CASE("missing or misshaped parameters are rejected on apply") {
    MNet net = build_mnet([] {
        MNetConfig cfg;
        cfg.depth = 2;
        cfg.base_channels = 4;
        cfg.input_size = 16;
        return cfg;
    }());
    TempFile f("weights_apply_test.bin");
    save_parameters(f.path, net.graph.params());
    auto loaded = load_parameters(f.path);
    loaded.pop_back();
    CHECK_THROWS_WITH_AS(apply_parameters(net.graph, loaded), doctest::Contains("missing"),
                         std::invalid_argument);
}

TEST_CASE("png image round trip at 8-bit resolution") {
    std::mt19937 rng(5);
    Image img(3, 24, 31);
    std::uniform_int_distribution<int> byte(0, 255);
    for (float& v : img.pix) v = static_cast<float>(byte(rng)) / 255.0f;
    TempFile f("png_roundtrip_test.png");
    write_png(f.path, img);
    const Image back = read_png(f.path);
    REQUIRE(back.channels == 3);
    REQUIRE(back.height == 24);
    REQUIRE(back.width == 31);
    for (std::size_t i = 0; i < img.pix.size(); ++i) CHECK(back.pix[i] == img.pix[i]);
}

TEST_CASE("grayscale png and mask round trip") {
    std::mt19937 rng(6);
    Mask m(17, 23);
    std::bernoulli_distribution coin(0.4);
    for (auto& v : m.pix) v = coin(rng) ? 1 : 0;
    TempFile f("mask_roundtrip_test.png");
    write_mask_png(f.path, m);
    const Mask back = read_mask_png(f.path);
    CHECK(back.pix == m.pix);

    Image gray(1, 9, 9, 0.25f);
    TempFile g("gray_roundtrip_test.png");
    write_png(g.path, gray);
    const Image gback = read_png(g.path);
    CHECK(gback.channels == 1);
}

TEST_CASE("reading a non-png fails cleanly") {
    TempFile f("not_a_png_test.png");
    std::ofstream out(f.path);
    out << "this is not a png";
    out.close();
    CHECK_THROWS_AS(read_png(f.path), std::runtime_error);
}

TEST_CASE("config files round trip and reject unknown keys") {
    RunConfig rc = default_run_config();
    rc.model.depth = 4;
    rc.model.base_channels = 12;
    rc.model.input_size = 64;
    rc.model.side_alpha = {0.1f, 0.2f, 0.3f, 0.4f};
    rc.train.lr0 = 0.025f;
    rc.train.seed = 77;
    rc.polar_enabled = false;
    rc.synth.noise_sigma = 0.05;

    TempFile f("config_roundtrip_test.txt");
    write_config_file(f.path, rc);
    const RunConfig back = load_config_file(f.path, default_run_config());
    CHECK(format_config(back) == format_config(rc));

    TempFile g("config_unknown_test.txt");
    {
        std::ofstream out(g.path);
        out << "model.depth=3\nnot.a.key=1\n";
    }
    CHECK_THROWS_WITH_AS(load_config_file(g.path, default_run_config()),
                         doctest::Contains("unknown key"), std::invalid_argument);

    TempFile h("config_badvalue_test.txt");
    {
        std::ofstream out(h.path);
        out << "model.depth=soon\n";
    }
    CHECK_THROWS_AS(load_config_file(h.path, default_run_config()), std::invalid_argument);
}

TEST_CASE("config flags parse comments and blank lines") {
    TempFile f("config_comments_test.txt");
    {
        std::ofstream out(f.path);
        out << "# a comment\n\nmodel.depth=2\n  train.lr0 = 0.5\n";
    }
    const RunConfig rc = load_config_file(f.path, default_run_config());
    CHECK(rc.model.depth == 2);
    CHECK(rc.train.lr0 == doctest::Approx(0.5f));
}
