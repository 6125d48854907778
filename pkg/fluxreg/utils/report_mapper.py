#!/usr/bin/env python3
"""
report_mapper.py - CSV, JSON and PDF artifacts for lab runs
Tables go through pandas with 17 significant digits; every file is written
to a temporary name and renamed into place
Uses ReportLab for the PDF verification report
"""

import json
import logging
import os
import tempfile
from datetime import datetime
from typing import Dict, List, Optional, Sequence

import pandas as pd
from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER, TA_LEFT
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import PageBreak, Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from fluxreg_system import settings
from ..exceptions import IoError
from ..models import Scenario, VerificationReport

logger = logging.getLogger(__name__)

HEADER_BLUE = colors.HexColor('#1a237e')
FAIL_RED = colors.HexColor('#c62828')


def atomic_write(path: str, data: bytes) -> str:
    """Write data to path through a temporary file in the same directory"""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix='.tmp-')
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, path)
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e.strerror}") from e
    return path


def frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=settings.FLOAT_FORMAT, lineterminator='\n')


def to_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_json_default) + '\n'


def _json_default(value):
    if hasattr(value, 'tolist'):
        return value.tolist()
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def _fmt(value: float) -> str:
    return f"{value:.6g}" if isinstance(value, float) else str(value)


class ReportMapper:
    """
    Maps lab results to files under one output directory
    """

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = output_dir or settings.OUTPUT_DIR
        self.styles = getSampleStyleSheet()
        self._setup_custom_styles()

    def _setup_custom_styles(self):
        """Setup custom paragraph styles"""
        self.styles.add(ParagraphStyle(
            name='ReportTitle',
            parent=self.styles['Heading1'],
            fontSize=16,
            textColor=HEADER_BLUE,
            spaceAfter=6,
            alignment=TA_CENTER,
            fontName='Helvetica-Bold'
        ))
        self.styles.add(ParagraphStyle(
            name='CheckTitle',
            parent=self.styles['Heading2'],
            fontSize=12,
            textColor=FAIL_RED,
            spaceAfter=4,
            alignment=TA_LEFT,
            fontName='Helvetica-Bold'
        ))

    def path_for(self, filename: str) -> str:
        return filename if os.path.isabs(filename) else os.path.join(self.output_dir, filename)

    # tables

    def write_csv(self, frame: pd.DataFrame, filename: str) -> str:
        path = atomic_write(self.path_for(filename), frame_to_csv(frame).encode('utf-8'))
        logger.info("Wrote %s (%d rows)", path, len(frame))
        return path

    def write_json(self, data, filename: str) -> str:
        path = atomic_write(self.path_for(filename), to_json(data).encode('utf-8'))
        logger.info("Wrote %s", path)
        return path

    def write_text(self, text: str, filename: str) -> str:
        return atomic_write(self.path_for(filename), text.encode('utf-8'))

    def write_verification(self, report: VerificationReport, stem: str = 'verification',
                           formats: Sequence[str] = ('csv', 'json')) -> Dict[str, str]:
        paths = {}
        if 'csv' in formats:
            paths['csv'] = self.write_csv(report.to_frame(), f"{stem}.csv")
        if 'json' in formats:
            paths['json'] = self.write_json(report.to_dict(), f"{stem}.json")
        return paths

    # PDF

    def _summary_table(self, report: VerificationReport) -> Table:
        """Rows, violations and fitted constants per check kind"""
        kinds = sorted({r.kind for r in report.rows})
        table_data = [['Check', 'Rows', 'Violations', 'Fitted / tightest']]
        for kind in kinds:
            rows = [r for r in report.rows if r.kind == kind]
            info = report.summary.get(kind, {})
            fitted = ', '.join(f"{k}={_fmt(v)}" for k, v in sorted(info.items())
                               if isinstance(v, (int, float)) and not isinstance(v, bool))
            table_data.append([kind, str(len(rows)), str(sum(not r.passed for r in rows)), fitted])
        table_data.append(['TOTAL', str(len(report.rows)), str(report.violations), ''])

        table = Table(table_data, colWidths=[1.4 * inch, 0.8 * inch, 1.0 * inch, 3.6 * inch])
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), HEADER_BLUE),
            ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
            ('FONTNAME', (0, -1), (-1, -1), 'Helvetica-Bold'),
            ('BACKGROUND', (0, -1), (-1, -1), colors.HexColor('#f5f5f5')),
            ('LINEABOVE', (0, -1), (-1, -1), 1.5, HEADER_BLUE),
            ('GRID', (0, 0), (-1, -1), 0.5, colors.grey),
            ('ROWBACKGROUNDS', (0, 1), (-1, -2), [colors.white, colors.HexColor('#f9f9f9')]),
        ]))
        return table

    def _rows_table(self, rows) -> Table:
        table_data = [['t', 'Pair', 'lhs', 'rhs', 'margin', 'pass']]
        for r in rows:
            table_data.append([_fmt(r.t), r.pair_id[:28], _fmt(r.lhs), _fmt(r.rhs), _fmt(r.margin),
                               'yes' if r.passed else 'NO'])
        table = Table(table_data, colWidths=[0.7 * inch, 2.2 * inch, 1.0 * inch, 1.0 * inch,
                                             1.0 * inch, 0.5 * inch], repeatRows=1)
        style = [
            ('BACKGROUND', (0, 0), (-1, 0), HEADER_BLUE),
            ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 8),
            ('GRID', (0, 0), (-1, -1), 0.5, colors.grey),
            ('ROWBACKGROUNDS', (0, 1), (-1, -1), [colors.white, colors.HexColor('#f9f9f9')]),
        ]
        for k, r in enumerate(rows, start=1):
            if not r.passed:
                style.append(('TEXTCOLOR', (0, k), (-1, k), FAIL_RED))
        table.setStyle(TableStyle(style))
        return table

    def generate_report_pdf(self, report: VerificationReport, scenario: Optional[Scenario] = None,
                            filename: Optional[str] = None) -> str:
        """
        Verification report: a summary page, then one page per check kind

        Returns:
            Path to the generated PDF
        """
        if not filename:
            filename = f"Verification_{datetime.now().strftime('%Y%m%d_%H%M%S')}"
        output_path = self.path_for(f"{filename}.pdf")
        os.makedirs(os.path.dirname(os.path.abspath(output_path)), exist_ok=True)

        story: List = [Paragraph("<b>VERIFICATION REPORT</b>", self.styles['ReportTitle'])]
        if scenario is not None:
            story.append(Paragraph(
                f"<b>Flux:</b> {scenario.flux.to_text()} &nbsp; <b>M:</b> {_fmt(scenario.M)} "
                f"&nbsp; <b>delta:</b> {_fmt(scenario.delta)} &nbsp; <b>T:</b> {_fmt(scenario.T)}",
                self.styles['Normal'],
            ))
        status = 'PASSED' if report.passed else f'FAILED ({report.violations} violations)'
        story.append(Paragraph(f"<b>Status:</b> {status}", self.styles['Normal']))
        story.append(Spacer(1, 0.15 * inch))
        story.append(self._summary_table(report))

        for kind in sorted({r.kind for r in report.rows}):
            story.append(PageBreak())
            story.append(Paragraph(f"<b>Check: {kind}</b>", self.styles['CheckTitle']))
            story.append(Spacer(1, 0.1 * inch))
            story.append(self._rows_table([r for r in report.rows if r.kind == kind]))

        doc = SimpleDocTemplate(output_path, pagesize=A4, rightMargin=0.5 * inch, leftMargin=0.5 * inch,
                                topMargin=0.5 * inch, bottomMargin=0.5 * inch)
        try:
            doc.build(story)
        except OSError as e:
            raise IoError(f"Cannot write {output_path}: {e.strerror}") from e
        logger.info("PDF generated: %s", output_path)
        return output_path
