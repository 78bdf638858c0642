# tests/test_check_setup.py

import check_setup


def test_repository_files_are_present(capsys):
    assert check_setup.check_required_files()
    assert "MISSING" not in capsys.readouterr().out


def test_missing_files_are_reported(tmp_path, capsys):
    assert not check_setup.check_required_files(root=tmp_path)
    assert "configs/balancing.cfg - MISSING" in capsys.readouterr().out


def test_python_version_and_threads():
    assert check_setup.check_python_version()
    assert check_setup.check_threads()


def test_smoke_count(capsys):
    assert check_setup.check_smoke_count()
    assert "81 lattice points" in capsys.readouterr().out
