import json
from pathlib import Path

import pytest

from cli import build_parser, main, parse_seeds
from distribution_io import read_distribution

DATA = Path(__file__).parent / "data"


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"synthgen": {"steps": 300}, "genetic": {"islands": 1}}))
    return str(path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestPlace:
    def test_dp(self, capsys, tiny_file):
        code, out, _ = run(capsys, 'place', tiny_file, '--method', 'dp', '-k', 2)
        assert code == 0
        payload = json.loads(out)
        assert payload['plan'] == [1, 3]
        assert payload['saved'] == 4

    def test_uniform(self, capsys, tiny_file):
        code, out, _ = run(capsys, 'place', tiny_file, '--method', 'uniform', '-k', 1)
        assert code == 0
        payload = json.loads(out)
        assert payload['plan'] == [2]
        assert payload['saved'] == 2

    def test_genetic_with_generation_cap(self, capsys, tiny_file, tmp_path):
        trace = tmp_path / "fitness.csv"
        code, out, _ = run(capsys, 'place', tiny_file, '--method', 'genetic', '-k', 1, '--seed', 3,
                           '--max-generations', 2, '--islands', 1, '--base-population', 10,
                           '--expanded-population', 20, '--elite', 1, '--trace-fitness', trace)
        assert code == 0
        assert json.loads(out)['saved'] == 3
        assert trace.read_text().startswith("generation,best,median\n")

    def test_csv_output_to_file(self, capsys, tiny_file, tmp_path):
        out_path = tmp_path / "report.csv"
        code, out, _ = run(capsys, 'place', tiny_file, '-k', 2, '--csv', '--out', out_path)
        assert code == 0
        assert out == ""
        assert out_path.read_text().startswith("left,right,height,area\n")

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, 'place', tmp_path / "absent.dist", '-k', 1)
        assert code == 2
        assert "not found" in err

    def test_budget_refusal(self, capsys, tiny_file):
        code, _, _ = run(capsys, 'place', tiny_file, '--method', 'exhaustive', '-k', 1, '--budget', 1)
        assert code == 3

    def test_negative_k(self, capsys, tiny_file):
        code, _, _ = run(capsys, 'place', tiny_file, '-k', -1)
        assert code == 2

    def test_unknown_flag(self, capsys, tiny_file):
        code, _, _ = run(capsys, 'place', tiny_file, '-k', 1, '--turbo')
        assert code == 2

    def test_missing_k(self, capsys, tiny_file):
        code, _, _ = run(capsys, 'place', tiny_file)
        assert code == 2


class TestOtherCommands:
    def test_eval(self, capsys, tiny_file):
        code, out, _ = run(capsys, 'eval', tiny_file, '--plan', '3')
        assert code == 0
        payload = json.loads(out)
        assert payload['saved'] == 3
        assert payload['reduction'] == 0.75

    def test_eval_out_of_range(self, capsys, tiny_file):
        code, _, _ = run(capsys, 'eval', tiny_file, '--plan', '4')
        assert code == 2

    def test_wfft(self, capsys, tiny_file):
        code, out, _ = run(capsys, 'wfft', tiny_file)
        assert code == 0
        assert json.loads(out)['wfft'] > 0

    def test_wfft_spectrum_csv(self, capsys, tiny_file):
        code, out, _ = run(capsys, 'wfft', tiny_file, '--csv')
        assert code == 0
        assert out.startswith("index,magnitude\n")
        assert len(out.splitlines()) == 102

    def test_export_ilp_matches_golden(self, capsys, tiny_file):
        code, out, _ = run(capsys, 'export-ilp', tiny_file, '-k', 1)
        assert code == 0
        assert out == (DATA / "tiny_k1.lp").read_text(encoding="utf-8")

    def test_import_solution(self, capsys, tiny_file, tmp_path):
        solution = tmp_path / "tiny.sol"
        solution.write_text("v0 1\nv2 1\nv3 1\ne_0_2 1\ne_2_3 1\n")
        code, out, _ = run(capsys, 'import-sol', tiny_file, solution, '-k', 1)
        assert code == 0
        payload = json.loads(out)
        assert payload['plan'] == [3]
        assert payload['method'] == 'ilp'

    def test_import_inconsistent_solution(self, capsys, tiny_file, tmp_path):
        solution = tmp_path / "zero.sol"
        solution.write_text("v0 0\n")
        code, _, _ = run(capsys, 'import-sol', tiny_file, solution, '-k', 1)
        assert code == 2

    def test_gen_is_reproducible(self, capsys, tmp_path, small_config):
        first, second = tmp_path / "a.dist", tmp_path / "b.dist"
        assert run(capsys, 'gen', '--seed', 4, '--config', small_config, '--out', first)[0] == 0
        assert run(capsys, 'gen', '--seed', 4, '--config', small_config, '--out', second)[0] == 0
        assert first.read_text() == second.read_text()
        assert "synthgen rng=PCG64" in first.read_text()
        assert read_distribution(first).t_end == 300

    def test_cachesim(self, capsys, tmp_path):
        trace = tmp_path / "loop.trace"
        trace.write_text("".join(f"R {(i % 4) * 64:x} 4\n" for i in range(40)))
        out_path = tmp_path / "loop.dist"
        code, _, _ = run(capsys, 'cachesim', trace, '--size', 2048, '--out', out_path)
        assert code == 0
        d = read_distribution(out_path)
        assert d.entries == ((0, 1), (1, 1), (2, 1), (3, 1))
        assert d.t_end == 40

    def test_cachesim_bad_geometry(self, capsys, tmp_path):
        trace = tmp_path / "one.trace"
        trace.write_text("R 0 4\n")
        code, _, _ = run(capsys, 'cachesim', trace, '--size', 1000)
        assert code == 2

    def test_break_even(self, capsys, tiny_file):
        code, out, _ = run(capsys, 'break-even', tiny_file, '--reference-k', 2, '--k-max', 4)
        assert code == 0
        payload = json.loads(out)
        assert payload['reference_saved'] == 4
        assert payload['matching_k'] == 2


class TestCompare:
    def test_rows_for_files(self, capsys, tiny_file):
        code, out, _ = run(capsys, 'compare', '--dist', tiny_file, '--methods', 'uniform,dp',
                           '-k', 1, '-k', 2, '--omit-timing')
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "dist_id,method,k,saved,baseline,reduction,wfft,elapsed_ms,error"
        assert len(lines) == 5
        assert lines[3].startswith("tiny,dp,1,3,4,0.750000,")

    def test_synthetic_sweep_is_byte_identical(self, capsys, small_config):
        argv = ['compare', '--synth-seeds', '0-2', '--methods', 'uniform,genetic,dp', '-k', 4,
                '--max-generations', 3, '--omit-timing', '--seed', 1, '--config', small_config]
        code, first, _ = run(capsys, *argv)
        assert code == 0
        _, second, _ = run(capsys, *argv)
        assert first == second
        assert len(first.splitlines()) == 1 + 3 * 3

    def test_spec_file_and_json(self, capsys, tmp_path, tiny_file):
        spec = tmp_path / "spec.json"
        csv_path = tmp_path / "rows.csv"
        spec.write_text(json.dumps({
            'sources': [{'kind': 'file', 'path': str(tiny_file)}],
            'methods': ['dp'],
            'k_values': [1, 2],
            'output_csv': str(csv_path),
        }))
        code, out, _ = run(capsys, 'compare', '--spec', spec, '--json')
        assert code == 0
        records = json.loads(out)
        assert [r['saved'] for r in records] == [3, 4]
        assert csv_path.read_text().startswith("dist_id,")

    def test_empty_method_list(self, capsys, tiny_file):
        code, _, _ = run(capsys, 'compare', '--dist', tiny_file, '--methods', '', '-k', 1)
        assert code == 2

    def test_partial_failure_is_recorded(self, capsys, tmp_path, tiny_file):
        config = tmp_path / "budget.json"
        config.write_text(json.dumps({"placement": {"exhaustive_budget": 1}}))
        code, out, _ = run(capsys, 'compare', '--dist', tiny_file, '--methods', 'dp,exhaustive', '-k', 1,
                           '--config', config)
        assert code == 0
        assert "BudgetExceededError" in out.splitlines()[2]

    def test_everything_refused(self, capsys, tmp_path, tiny_file):
        config = tmp_path / "budget.json"
        config.write_text(json.dumps({"placement": {"exhaustive_budget": 1}}))
        code, out, _ = run(capsys, 'compare', '--dist', tiny_file, '--methods', 'exhaustive', '-k', 1,
                           '--config', config)
        assert code == 3
        assert "BudgetExceededError" in out


def test_every_subcommand_has_help(capsys):
    parser = build_parser()
    for command in ('gen', 'place', 'eval', 'wfft', 'export-ilp', 'import-sol', 'cachesim', 'compare', 'break-even'):
        with pytest.raises(SystemExit) as info:
            parser.parse_args([command, '--help'])
        assert info.value.code == 0
        assert '--log-level' in capsys.readouterr().out


def test_parse_seeds():
    assert parse_seeds("0-3") == [0, 1, 2, 3]
    assert parse_seeds("1,5,7-8") == [1, 5, 7, 8]
