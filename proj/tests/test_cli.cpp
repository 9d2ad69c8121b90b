#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* env = std::getenv("POLARSEG_BIN");
    REQUIRE_MESSAGE(env != nullptr, "POLARSEG_BIN must point at the CLI binary");
    return env;
}

int run(const std::string& args) {
    const std::string cmd = binary() + " " + args + " >> cli_test_log.txt 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file: " << p.string());
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

// keep every run small: 6 images, 64 px, shallow net, 2 epochs
const std::string kTrainFlags =
    " --size 64 --radius 28 --bins 64 -D synth.disc_a_min=13 -D synth.disc_a_max=18"
    " -D synth.center_jitter=3 -D model.depth=2 -D model.base_channels=4"
    " -D train.iterations=2 -D train.lr0=0.1";

}  // namespace

TEST_CASE("full pipeline runs end to end through the binary") {
    const fs::path root = "cli_pipeline_tmp";
    fs::remove_all(root);
    fs::create_directories(root);

    CHECK(run("synth --out " + (root / "data").string() + " --count 6 --seed 5" +
              kTrainFlags) == 0);
    CHECK(fs::exists(root / "data" / "manifest.csv"));
    CHECK(fs::exists(root / "data" / "img_0000.png"));
    CHECK(fs::exists(root / "data" / "config.resolved.txt"));

    CHECK(run("train --data " + (root / "data" / "manifest.csv").string() + " --out " +
              (root / "run").string() + " --seed 5" + kTrainFlags) == 0);
    CHECK(fs::exists(root / "run" / "ckpt.weights.bin"));
    CHECK(fs::exists(root / "run" / "ckpt.velocity.bin"));
    CHECK(fs::exists(root / "run" / "ckpt.meta.json"));
    CHECK(fs::exists(root / "run" / "loss_curve.csv"));

    CHECK(run("segment --manifest " + (root / "data" / "manifest.csv").string() +
              " --weights " + (root / "run" / "ckpt").string() + " --out " +
              (root / "pred").string() + " --seed 5" + kTrainFlags) == 0);
    CHECK(fs::exists(root / "pred" / "img_0000_disc.png"));
    CHECK(fs::exists(root / "pred" / "img_0000_cup.png"));
    CHECK(fs::exists(root / "pred" / "img_0000_record.txt"));
    CHECK(fs::exists(root / "pred" / "segment_records.csv"));

    CHECK(run("eval --pred " + (root / "pred").string() + " --truth " +
              (root / "data" / "manifest.csv").string() + " --out " +
              (root / "eval.csv").string()) == 0);
    const std::string eval_text = slurp(root / "eval.csv");
    CHECK(eval_text.find("e_disc") != std::string::npos);
    CHECK(eval_text.find("mean,") != std::string::npos);

    CHECK(run("screen --eval " + (root / "eval.csv").string() + " --truth " +
              (root / "data" / "manifest.csv").string() + " --out " +
              (root / "roc.csv").string()) == 0);
    CHECK(slurp(root / "roc.csv").find("fpr,tpr") != std::string::npos);
    CHECK(fs::exists(root / "auc.txt"));

    fs::remove_all(root);
}

TEST_CASE("polar subcommand writes the image and its sidecar") {
    const fs::path root = "cli_polar_tmp";
    fs::remove_all(root);
    fs::create_directories(root);
    CHECK(run("synth --out " + (root / "data").string() + " --count 1 --seed 9" +
              kTrainFlags) == 0);
    CHECK(run("polar --image " + (root / "data" / "img_0000.png").string() + " --out " +
              (root / "polar").string() + " --center 32 32 --radius 28 --bins 64") == 0);
    CHECK(fs::exists(root / "polar" / "img_0000_polar.png"));
    CHECK(fs::exists(root / "polar" / "img_0000_polar.txt"));
    fs::remove_all(root);
}

TEST_CASE("same seed twice produces byte-identical checkpoints and outputs") {
    const fs::path root = "cli_determinism_tmp";
    fs::remove_all(root);
    fs::create_directories(root);
    CHECK(run("synth --out " + (root / "data").string() + " --count 4 --seed 7" +
              kTrainFlags) == 0);
    for (const char* tag : {"a", "b"})
        CHECK(run("train --data " + (root / "data" / "manifest.csv").string() + " --out " +
                  (root / tag).string() + " --seed 7" + kTrainFlags) == 0);
    CHECK(slurp(root / "a" / "ckpt.weights.bin") == slurp(root / "b" / "ckpt.weights.bin"));
    CHECK(slurp(root / "a" / "ckpt.velocity.bin") ==
          slurp(root / "b" / "ckpt.velocity.bin"));
    CHECK(slurp(root / "a" / "loss_curve.csv") == slurp(root / "b" / "loss_curve.csv"));
    fs::remove_all(root);
}

TEST_CASE("corrupt weights are rejected mentioning the expected magic") {
    const fs::path root = "cli_badweights_tmp";
    fs::remove_all(root);
    fs::create_directories(root);
    CHECK(run("synth --out " + (root / "data").string() + " --count 1 --seed 3" +
              kTrainFlags) == 0);
    {
        std::ofstream bad(root / "bad.weights.bin", std::ios::binary);
        bad << "GARBAGE";
        std::ofstream meta(root / "bad.meta.json");
        meta << "{\"format\":\"polarseg-checkpoint-v1\",\"step\":0,"
             << "\"model\":{\"depth\":2,\"base_channels\":4,\"input_size\":64,"
             << "\"in_channels\":3,\"num_classes\":2,\"side_alpha\":[0.5,0.5],"
             << "\"class_weights\":[0.5,0.5],\"fused_loss_weight\":0.0},"
             << "\"train\":{\"lr0\":0.1,\"momentum\":0.9,\"iterations\":1,"
             << "\"batch_size\":1,\"decay_power\":0.9,\"lr_floor\":0.01,\"seed\":1}}";
    }
    CHECK(run("segment --image " + (root / "data" / "img_0000.png").string() +
              " --weights " + (root / "bad").string() + " --out " +
              (root / "pred").string()) != 0);
    fs::remove_all(root);
}

TEST_CASE("unknown config keys make the CLI fail") {
    const fs::path root = "cli_badconfig_tmp";
    fs::remove_all(root);
    fs::create_directories(root);
    CHECK(run("synth --out " + (root / "x").string() + " --count 1 -D not.a.key=3") != 0);
    fs::remove_all(root);
}
