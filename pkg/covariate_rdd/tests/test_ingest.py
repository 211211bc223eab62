import tempfile
from pathlib import Path
from unittest import TestCase
from unittest.mock import patch

import pytest

from covariate_rdd.errors import IngestionError
from covariate_rdd.ingest import ingest_csv


class TestIngestCsv(TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def write(self, text, name="data.csv"):
        path = self.path / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_outcome_and_running_variable_only(self):
        data = ingest_csv(self.write("y,x\n1.0,-0.5\n2.0,0.1\n3.5,0.7\n"))
        assert data.n == 3
        assert data.p == 0
        assert list(data.y) == [1.0, 2.0, 3.5]

    def test_covariate_order_preserved(self):
        data = ingest_csv(self.write("z2,y,x,z1,note\n5,1,0.1,7,a\n6,2,-0.1,8,b\n"))
        assert data.p == 2
        assert list(data.z[:, 0]) == [5.0, 6.0]
        assert list(data.z[:, 1]) == [7.0, 8.0]

    def test_column_mapping(self):
        text = "outcome,score,age,income\n1,0.2,30,5\n2,-0.2,40,6\n"
        data = ingest_csv(self.write(text), y_col="outcome", x_col="score", z_cols=["income"], cutoff=0.1)
        assert data.p == 1
        assert list(data.z[:, 0]) == [5.0, 6.0]
        assert data.cutoff == 0.1

    def test_blank_lines_skipped(self):
        data = ingest_csv(self.write("y,x\n1,0.1\n\n2,-0.1\n"))
        assert data.n == 2

    @patch("covariate_rdd.ingest.logger")
    def test_non_numeric_cell_names_row_and_column(self, mock_logger):
        rows = "".join(f"{i},{i / 100}\n" for i in range(15))
        path = self.write("y,x\n" + rows + "abc,0.5\n")
        with pytest.raises(IngestionError, match="Row 17, column 'y'"):
            ingest_csv(path)
        mock_logger.error.assert_called_with("Row 17, column 'y': cannot parse 'abc' as a number.")

    def test_non_finite_cell(self):
        with pytest.raises(IngestionError, match="not finite"):
            ingest_csv(self.write("y,x\n1,0.1\nnan,0.2\n"))
        with pytest.raises(IngestionError, match="not finite"):
            ingest_csv(self.write("y,x\n1,inf\n", name="inf.csv"))

    def test_ragged_row(self):
        with pytest.raises(IngestionError, match="Row 3: expected 2 fields, found 3"):
            ingest_csv(self.write("y,x\n1,0.1\n2,0.2,9\n"))

    def test_missing_column(self):
        with pytest.raises(IngestionError, match="missing required column"):
            ingest_csv(self.write("y,score\n1,0.1\n"))

    def test_empty_file(self):
        with pytest.raises(IngestionError, match="no header"):
            ingest_csv(self.write(""))
        with pytest.raises(IngestionError, match="no data rows"):
            ingest_csv(self.write("y,x\n", name="header_only.csv"))

    def test_missing_file(self):
        with pytest.raises(IngestionError, match="does not exist"):
            ingest_csv(self.path / "absent.csv")

    def test_byte_order_mark(self):
        path = self.path / "bom.csv"
        path.write_bytes(b"\xef\xbb\xbfy,x\n1,0.1\n2,-0.1\n")
        data = ingest_csv(path)
        assert list(data.y) == [1.0, 2.0]

    def test_invalid_utf8_names_row(self):
        path = self.path / "latin1.csv"
        path.write_bytes(b"y,x\n1,0.1\n2,-0.1\n\xff\xfe,0.3\n")
        with pytest.raises(IngestionError, match="Row 4: invalid UTF-8"):
            ingest_csv(path)
