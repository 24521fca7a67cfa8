"""Acceptance gate: one test per criterion, each printing PASS or FAIL."""
import json
import math
import subprocess
import time

import numpy as np
import pytest

from conftest import check_grads
from rtlloc.blocks import SourceFile, build_snapshot, segment_blocks
from rtlloc.config import TrainConfig, desk_scale_config
from rtlloc.data import Corpus
from rtlloc.dtg import build_dtg
from rtlloc.evaluate import build_indexes, evaluate_dataset
from rtlloc.index import SnapshotIndex, rank_by_scores, score_query
from rtlloc.layers import Affine, Embedding, GatV2Layer, LayerNorm
from rtlloc.losses import (loss_infonce_listwise, loss_infonce_mean,
                           loss_margin_rank, loss_mnrl)
from rtlloc.metrics import (average_precision, compute_metrics, hit_at_k,
                            reciprocal_rank, recall_at_k)
from rtlloc.mine import mine_repository
from rtlloc.robustness import anonymize_snapshot, evaluate_robustness
from rtlloc.split import ip_disjoint_split
from rtlloc.synthgen import generate_corpus
from rtlloc.tensor import Tensor, tsum
from rtlloc.training import STAGE_FILES, TrainingPipeline
from test_miner import COUNTER_V1, FIFO_V1, TB_V1, git


def report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] criterion {num} ({name}): {status}"
          + (f" [{detail}]" if detail else ""))
    assert ok, f"criterion {num} ({name}): {detail}"


@pytest.fixture(scope="module")
def trained_system(tmp_path_factory):
    """40-design corpus, IP-disjoint split, full 4-stage run with seed 36."""
    t0 = time.perf_counter()
    sc = generate_corpus(num_designs=40, seed=36)
    corpus = Corpus.from_snapshots(sc.snapshots)
    train, val, test = ip_disjoint_split(sc.dataset, seed=36)
    out = tmp_path_factory.mktemp("models")
    pipe = TrainingPipeline(corpus, train, desk_scale_config(seed=36), out)
    pipe.run_all()
    models = pipe.load_all()
    return {"sc": sc, "corpus": corpus, "train": train, "test": test,
            "models": models, "seconds": time.perf_counter() - t0}


class TestCriterion1:
    def test_metric_oracles(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(99)
        for _ in range(200):
            n = int(rng.integers(2, 50))
            ranking = [f"b{i}" for i in rng.permutation(n)]
            k = int(rng.integers(1, max(2, n // 2)))
            rel = set(rng.choice(ranking, k, replace=False).tolist())
            # brute-force definitions
            ranks = [i + 1 for i, b in enumerate(ranking) if b in rel]
            assert reciprocal_rank(ranking, rel) == 1.0 / min(ranks)
            s, hits = 0.0, 0
            for i, b in enumerate(ranking):
                if b in rel:
                    hits += 1
                    s += hits / (i + 1)
            assert average_precision(ranking, rel) == pytest.approx(
                s / len(rel), abs=1e-12)
            for kk in (1, 5, 10):
                assert recall_at_k(ranking, rel, kk) == \
                    len(set(ranking[:kk]) & rel) / len(rel)
                assert hit_at_k(ranking, rel, kk) == \
                    float(bool(set(ranking[:kk]) & rel))
        dt = time.perf_counter() - t0
        report(1, "metric oracle equivalence", dt < 5.0,
               f"200 instances in {dt:.2f}s")


class TestCriterion2:
    def test_gradient_integrity(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(11)
        worst = 0.0

        def bump(err):
            nonlocal worst
            worst = max(worst, err)

        for trial in range(20):
            d_in = int(rng.integers(2, 6))
            d_out = int(rng.integers(2, 6))
            n = int(rng.integers(2, 7))

            aff = Affine(rng, d_in, d_out)
            x = Tensor(rng.standard_normal((n, d_in)), requires_grad=True)
            bump(check_grads(lambda: tsum(aff(x) * aff(x)),
                             [x] + [p.tensor for p in aff.trainable()],
                             max_coords=4))

            ln = LayerNorm(d_in)
            y = Tensor(rng.standard_normal((n, d_in)), requires_grad=True)
            bump(check_grads(lambda: tsum(ln(y) * ln(y)),
                             [y] + [p.tensor for p in ln.trainable()],
                             max_coords=4))

            emb = Embedding(rng, 7, d_out)
            idx = rng.integers(0, 7, size=n)
            bump(check_grads(lambda: tsum(emb(idx) * emb(idx)),
                             [p.tensor for p in emb.trainable()],
                             max_coords=4))

            gat = GatV2Layer(rng, d_in, d_out, 2)
            h = Tensor(rng.standard_normal((n, d_in)), requires_grad=True)
            m = int(rng.integers(1, n * 2))
            src = rng.integers(0, n, size=m)
            dst = rng.integers(0, n, size=m)
            ef = Tensor(rng.standard_normal((m, 2)), requires_grad=True)
            bump(check_grads(lambda: tsum(gat(h, src, dst, ef)),
                             [h, ef] + [p.tensor for p in gat.trainable()],
                             max_coords=3))

            k = int(rng.integers(2, 6))
            sim = Tensor(0.3 * rng.standard_normal((k, k)),
                         requires_grad=True)
            bump(check_grads(lambda: loss_mnrl(sim, 0.5), [sim],
                             max_coords=6))

            pos = Tensor(0.3 * rng.standard_normal(()), requires_grad=True)
            negs = Tensor(0.3 * rng.standard_normal(k), requires_grad=True)
            bump(check_grads(lambda: loss_infonce_listwise(pos, negs, 0.3),
                             [pos, negs], max_coords=6))

            pairs = [(Tensor(0.3 * rng.standard_normal(()),
                             requires_grad=True),
                      Tensor(0.3 * rng.standard_normal(k),
                             requires_grad=True))]
            bump(check_grads(lambda: loss_infonce_mean(pairs, 0.3),
                             [pairs[0][0], pairs[0][1]], max_coords=6))

            ps = Tensor(rng.standard_normal(k) + 1.0, requires_grad=True)
            ns = Tensor(rng.standard_normal(k) - 1.0, requires_grad=True)
            gap = ps.data[:, None] - ns.data[None, :]
            if np.any(np.abs(0.5 - gap) < 1e-3):
                ps.data += 0.01
            bump(check_grads(lambda: loss_margin_rank(ps, ns, 0.5),
                             [ps, ns], max_coords=6))
        dt = time.perf_counter() - t0
        report(2, "gradient integrity", worst <= 1e-6 and dt < 30.0,
               f"worst rel err {worst:.2e}, {dt:.1f}s")


class TestCriterion3:
    def test_loss_closed_forms(self):
        mnrl = loss_mnrl(Tensor(np.full((4, 4), 0.25)), tau=0.05).item()
        lw = loss_infonce_listwise(Tensor(np.array(0.3)),
                                   Tensor(np.full(4, 0.3)), tau=0.07).item()
        m1 = loss_margin_rank(Tensor(np.array([1.0])),
                              Tensor(np.array([0.2])), 0.5).item()
        m2 = loss_margin_rank(Tensor(np.array([0.4])),
                              Tensor(np.array([0.4])), 0.5).item()
        m3 = loss_margin_rank(Tensor(np.array([0.1])),
                              Tensor(np.array([0.4])), 0.5).item()
        ok = (abs(mnrl - math.log(4)) <= 1e-9
              and abs(lw - math.log(5)) <= 1e-9
              and m1 == 0.0 and abs(m2 - 0.5) <= 1e-12
              and abs(m3 - 0.8) <= 1e-12)
        report(3, "loss closed forms", ok,
               f"mnrl-ln4 {abs(mnrl - math.log(4)):.1e}, "
               f"listwise-ln5 {abs(lw - math.log(5)):.1e}")


def _expert_rankings(dataset, corpus, models):
    indexes = build_indexes(corpus, models["text"], models["local"],
                            models["glide"],
                            {ex.snapshot_id for ex in dataset})
    gt = {ex.query_id: set(ex.positives) for ex in dataset}
    ranks = {m: {} for m in ("text", "local", "glob", "fused")}
    alphas = {}
    for ex in dataset:
        idx = indexes[ex.snapshot_id]
        alpha, ev, fused = score_query(ex.text, idx, models["text"],
                                       models["glide"], models["router"])
        alphas[ex.query_id] = alpha
        for j, m in enumerate(("text", "local", "glob")):
            ranks[m][ex.query_id] = rank_by_scores(
                ex.query_id, idx.block_ids, ev[:, j]).block_ids()
        ranks["fused"][ex.query_id] = rank_by_scores(
            ex.query_id, idx.block_ids, fused).block_ids()
    return ranks, alphas, gt


class TestCriterion4:
    def test_synthetic_end_to_end(self, trained_system):
        ts = trained_system
        ranks, _, gt = _expert_rankings(ts["test"], ts["corpus"],
                                        ts["models"])
        mrr = {m: compute_metrics(r, gt).mrr for m, r in ranks.items()}
        best_expert = max(mrr["text"], mrr["local"], mrr["glob"])
        ok = (mrr["fused"] >= 0.80
              and mrr["fused"] >= best_expert - 0.02
              and ts["seconds"] < 600.0)
        report(4, "synthetic end-to-end", ok,
               f"fused {mrr['fused']:.3f}, best expert {best_expert:.3f}, "
               f"{ts['seconds']:.0f}s")


class TestCriterion5:
    def test_router_specialization(self, trained_system):
        ts = trained_system
        _, alphas, _ = _expert_rankings(ts["test"], ts["corpus"],
                                        ts["models"])
        fam_alpha = {}
        for ex in ts["test"]:
            fam = ts["sc"].family_of[ex.query_id]
            fam_alpha.setdefault(fam, []).append(alphas[ex.query_id])
        expected = {"lexical": 0, "structural": 1, "topology": 2}
        matches = 0
        detail = []
        for fam, want in expected.items():
            mean = np.mean(fam_alpha[fam], axis=0)
            got = int(np.argmax(mean))
            matches += int(got == want)
            detail.append(f"{fam}:{np.round(mean, 2).tolist()}")
        report(5, "router specialization", matches >= 2,
               f"{matches}/3 matched; " + "; ".join(detail))


class TestCriterion6:
    def test_anonymization_robustness(self, trained_system):
        ts = trained_system
        # structural half: DTG edges identical up to positional renaming
        structural_ok = True
        for sid in list(ts["corpus"].snapshots)[:5]:
            snap = ts["corpus"].snapshots[sid]
            anon, id_map = anonymize_snapshot(snap)
            orig = sorted((e.src, e.dst, e.role, e.timing)
                          for e in build_dtg(snap).edges)
            got = sorted((id_map[e.src], id_map[e.dst], e.role, e.timing)
                         for e in build_dtg(anon).edges)
            structural_ok = structural_ok and got == orig

        lexical = [ex for ex in ts["test"]
                   if ts["sc"].family_of[ex.query_id] == "lexical"]
        m = ts["models"]
        rob = evaluate_robustness(lexical, ts["corpus"], m["text"],
                                  m["local"], m["glide"], m["router"])
        deltas = rob.deltas()
        ok = structural_ok and deltas["bm25"] < deltas["glide"]
        report(6, "anonymization robustness", ok,
               f"bm25 drop {deltas['bm25']:+.3f} vs glide drop "
               f"{deltas['glide']:+.3f}, graphs identical: {structural_ok}")


class TestCriterion7:
    def test_miner_fidelity(self, tmp_path):
        repo = tmp_path / "repo"
        repo.mkdir()
        git(repo, "init", "-q")
        git(repo, "config", "user.email", "dev@example.com")
        git(repo, "config", "user.name", "dev")

        def commit(message, **files):
            for rel, content in files.items():
                p = repo / rel
                p.parent.mkdir(parents=True, exist_ok=True)
                p.write_text(content)
            git(repo, "add", "-A")
            git(repo, "commit", "-q", "-m", message)

        commit("Add counter with overflow flag output",
               **{"chip/rtl/counter.sv": COUNTER_V1})
        commit("Fix reset value handling in the counter state register",
               **{"chip/rtl/counter.sv":
                  COUNTER_V1.replace("cnt <= 8'd0;", "cnt <= 8'd1;")})
        commit("Add fifo level threshold flag outputs",
               **{"chip/rtl/fifo.sv": FIFO_V1})
        commit("Correct overflow threshold so the flag asserts one cycle "
               "earlier",
               **{"chip/rtl/counter.sv":
                  COUNTER_V1.replace("cnt <= 8'd0;", "cnt <= 8'd1;")
                  .replace("== 8'hFF", ">= 8'hFE")})
        commit("Extend the bench for the overflow case",
               **{"chip/dv/counter_tb.sv": TB_V1})
        commit("Reformat indentation and whitespace",
               **{"chip/rtl/fifo.sv":
                  FIFO_V1.replace("  assign empty", "   assign empty")})

        r1 = mine_repository(str(repo))
        r2 = mine_repository(str(repo))
        expected_sets = [
            ["chip/rtl/counter.sv::counter::always_ff::0",
             "chip/rtl/counter.sv::counter::assign::0"],
            ["chip/rtl/counter.sv::counter::always_ff::0"],
            ["chip/rtl/fifo.sv::fifo_flags::assign::0",
             "chip/rtl/fifo.sv::fifo_flags::assign::1"],
            ["chip/rtl/counter.sv::counter::assign::0"],
        ]
        got_sets = [i.affected_block_ids for i in r1.instances]
        reasons = [r.reason for r in r1.rejections]
        idempotent = (
            [i.affected_block_ids for i in r2.instances] == got_sets
            and json.dumps([i.delta_spec.to_json_dict()
                            for i in r1.instances])
            == json.dumps([i.delta_spec.to_json_dict()
                           for i in r2.instances]))
        ok = (len(r1.instances) == 4 and got_sets == expected_sets
              and reasons == ["no_design_files", "label"] and idempotent)
        report(7, "miner fidelity", ok,
               f"{len(r1.instances)} accepted, rejects {reasons}, "
               f"idempotent {idempotent}")


class TestCriterion8:
    def test_determinism(self, tmp_path):
        sc = generate_corpus(num_designs=6, seed=36)
        corpus = Corpus.from_snapshots(sc.snapshots)
        cfg = desk_scale_config(seed=36)
        for stage in (cfg.text, cfg.local, cfg.glide, cfg.router):
            stage.epochs = min(stage.epochs, 2)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            TrainingPipeline(corpus, sc.dataset, cfg, out).run_all()
            outs.append(out)
        ckpt_ok = all(
            (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
            for f in list(STAGE_FILES.values()) + ["manifest.json"])

        pipe = TrainingPipeline(corpus, sc.dataset, cfg, outs[0])
        models = pipe.load_all()
        reps = [json.dumps(evaluate_dataset(
            sc.dataset, corpus, models["text"], models["local"],
            models["glide"], models["router"]).to_json_dict(),
            sort_keys=True).encode() for _ in range(2)]
        eval_ok = reps[0] == reps[1]
        report(8, "determinism", ckpt_ok and eval_ok,
               f"checkpoints identical {ckpt_ok}, reports identical {eval_ok}")


class TestCriterion9:
    def test_latency_envelope(self, trained_system):
        models = trained_system["models"]
        rng = np.random.default_rng(3)
        n = 10_000

        def unit(k, d):
            m = rng.standard_normal((k, d))
            return m / np.linalg.norm(m, axis=1, keepdims=True)

        index = SnapshotIndex("bench", [f"b{i:05d}" for i in range(n)],
                              unit(n, 384), unit(n, 384), unit(n, 128))
        query = "correct the handshake condition for the response channel"
        times = []
        for _ in range(30):
            t0 = time.perf_counter()
            score_query(query, index, models["text"], models["glide"],
                        models["router"])
            times.append(1000.0 * (time.perf_counter() - t0))
        mean_ms = float(np.mean(times))
        params = sum(models[s].num_params()
                     for s in ("text", "local", "glide", "router"))
        report(9, "latency envelope", mean_ms < 50.0 and params > 0,
               f"{mean_ms:.1f} ms mean over 10k candidates, "
               f"{params} parameters")


PARSER_FIXTURES = [
    # (source, expected block count), hand-annotated
    ("module f01(input logic a, output logic y);\n"
     "assign y = a;\nendmodule\n", 1),
    ("module f02(input logic a, b, output logic y, z);\n"
     "assign y = a & b;\nassign z = a | b;\nendmodule\n", 2),
    ("module f03(input logic clk, d, output logic q);\n"
     "always_ff @(posedge clk) q <= d;\nendmodule\n", 1),
    ("module f04(input logic c, a, b, output logic y);\n"
     "always_comb begin\n  if (c) y = a;\n  else y = b;\nend\n"
     "endmodule\n", 1),
    ("module f05(input logic clk, output logic [3:0] n);\n"
     "always_ff @(posedge clk) n <= n + 1;\n"
     "assign unused = 1'b0;\nendmodule\n", 2),
    ("module f06(input logic [1:0] s, input logic [3:0] a, b, c, d,\n"
     "           output logic [3:0] y);\n"
     "always_comb begin\n  case (s)\n    2'd0: y = a;\n    2'd1: y = b;\n"
     "    2'd2: y = c;\n    default: y = d;\n  endcase\nend\nendmodule\n", 1),
    ("module f07(input logic clk, rst_n, output logic q);\n"
     "always_ff @(posedge clk or negedge rst_n) begin\n"
     "  if (!rst_n) q <= '0;\n  else q <= ~q;\nend\nendmodule\n", 1),
    ("module f08(input logic a, output logic y);\n"
     "// a comment between blocks\nassign y = ~a; // trailing\n"
     "/* block comment */\nendmodule\n", 1),
    ("module f09(input logic a, output logic y);\n"
     "initial y = 0;\nassign y = a;\nendmodule\n", 1),
    ("module f10(input logic a, output logic y);\n"
     "function automatic logic inv(logic x);\n  return ~x;\nendfunction\n"
     "assign y = inv(a);\nendmodule\n", 1),
    ("module f11a(input logic a, output logic y);\nassign y = a;\n"
     "endmodule\nmodule f11b(input logic b, output logic z);\n"
     "assign z = ~b;\nendmodule\n", 2),
    ("module f12(input logic clk, input logic [7:0] d,\n"
     "           output logic [7:0] q);\n"
     "  logic [7:0] mid;\n  assign mid = d ^ 8'hA5;\n"
     "  always_ff @(posedge clk) q <= mid;\nendmodule\n", 2),
    ("module f13(input logic clk, en, d, output logic q);\n"
     "always @(posedge clk) if (en) q <= d;\nendmodule\n", 1),
    ("module f14(input logic a, b, output logic y);\n"
     "always @* y = a ^ b;\nendmodule\n", 1),
    ("module f15 #(parameter W = 4)(input logic [W-1:0] a,\n"
     "                              output logic [W-1:0] y);\n"
     "localparam logic [W-1:0] MASK = '1;\nassign y = a & MASK;\n"
     "endmodule\n", 1),
    ("module f16(input logic clk, input logic [3:0] a,\n"
     "           output logic p);\n"
     "assign p = ^a;\nalways_ff @(posedge clk) q <= p;\n"
     "assign z = {a[2:0], p};\nendmodule\n", 3),
    ("module f17(input logic a, output logic y);\n"
     "sub u0 (.x(a), .o(y));\nendmodule\n"
     "module sub(input logic x, output logic o);\n"
     "assign o = x;\nendmodule\n", 1),
    ("module f18(input logic [7:0] v, output logic [2:0] idx);\n"
     "always_comb begin\n  idx = '0;\n"
     "  for (int i = 0; i < 8; i++) if (v[i]) idx = i[2:0];\nend\n"
     "endmodule\n", 1),
    ("module f19(input logic a, output logic y);\n"
     "assign y = a; endmodule\n", 1),
    ("module f20(input logic c, a, b, output logic y, z);\n"
     "assign y = c ? a : b;\nalways_comb z = c ? b : a;\n"
     "assign w = \"assign in a string\";\nendmodule\n", 3),
]


class TestCriterion10:
    def test_parser_fidelity(self):
        assert len(PARSER_FIXTURES) == 20
        mismatches = []
        for i, (src, want) in enumerate(PARSER_FIXTURES):
            f = SourceFile(f"ip/f{i:02d}.sv", src)
            blocks = segment_blocks(f)
            if len(blocks) != want:
                mismatches.append((i, want, len(blocks)))
            raw = src.encode()
            for b in blocks:
                if raw[b.span[2]:b.span[3]].decode() != b.text:
                    mismatches.append((i, "span", b.block_id))
        report(10, "parser fidelity", not mismatches,
               f"20 files, mismatches: {mismatches}")
