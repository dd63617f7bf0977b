import numpy as np
import pytest

from beamimpact import assembly as asm
from beamimpact.matrix_io import (MatrixFileError, export_matrices, import_matrices,
                                  read_matrix, write_general, write_symmetric)


class TestTripletFormat:
    def test_identity_file(self, tmp_path):
        p = tmp_path / "eye.stiff"
        write_symmetric(p, np.eye(2))
        lines = [ln for ln in p.read_text().splitlines() if ln and not ln.startswith("#")]
        assert lines[0] == "symmetric 2"
        assert len(lines) == 3

    def test_index_out_of_range(self, tmp_path):
        p = tmp_path / "bad.mass"
        p.write_text("symmetric 2\n1 1 1.0\n3 1 0.5\n")
        with pytest.raises(MatrixFileError, match="index out of range at line 3"):
            read_matrix(p)

    def test_malformed_header(self, tmp_path):
        p = tmp_path / "bad.mass"
        p.write_text("# comment\nsymmetrik 2\n")
        with pytest.raises(MatrixFileError, match="line 2"):
            read_matrix(p)

    def test_asymmetric_duplicate(self, tmp_path):
        p = tmp_path / "dup.mass"
        p.write_text("symmetric 2\n2 1 0.5\n1 2 0.25\n")
        with pytest.raises(MatrixFileError, match="asymmetric duplicate entry at line 3"):
            read_matrix(p)

    def test_comments_and_blank_lines(self, tmp_path):
        p = tmp_path / "c.mass"
        p.write_text("# header\n\nsymmetric 2\n# entry\n1 1 2.0\n\n2 1 -1.0\n2 2 2.0\n")
        np.testing.assert_array_equal(read_matrix(p), [[2, -1], [-1, 2]])

    def test_general_roundtrip(self, tmp_path, rng):
        A = rng.standard_normal((4, 3))
        write_general(tmp_path / "a.rmat", A)
        np.testing.assert_array_equal(read_matrix(tmp_path / "a.rmat"), A)

    def test_seventeen_digits(self, tmp_path):
        x = 0.1 + 0.2
        write_symmetric(tmp_path / "x.mass", np.array([[x]]))
        assert read_matrix(tmp_path / "x.mass")[0, 0] == x


class TestModelRoundTrip:
    def test_beam_bit_exact(self, tmp_path, freefree_beam):
        m = freefree_beam.with_boundary([freefree_beam.dof_index(30, asm.TRANSVERSE)])
        export_matrices(m, tmp_path / "beam")
        back = import_matrices(tmp_path / "beam")
        assert np.abs(back.mass_matrix - m.mass_matrix).max() == 0.0
        assert np.abs(back.stiffness_matrix - m.stiffness_matrix).max() == 0.0
        assert back.dof_labels == m.dof_labels
        assert back.boundary_set == m.boundary_set

    def test_clamped_dofs_file_lists_supports(self, tmp_path, clamped_beam):
        export_matrices(clamped_beam, tmp_path / "cc")
        text = (tmp_path / "cc.dofs").read_text()
        assert text.count("constrained") == 4
        back = import_matrices(tmp_path / "cc")
        assert back.constrained == clamped_beam.constrained
