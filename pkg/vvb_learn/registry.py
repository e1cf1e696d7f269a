"""
Run manifest: an SQLite record of every dataset, model and evaluation.

Records are queried with filter dictionaries whose keys are column names,
optionally suffixed with an operator::

    manifest.find(DatasetRecord, {'task': 'class15', 'images_gte': 100})
    manifest.find(ModelRecord, {'or': [{'kind': 'svm'}, {'kind': 'cnn'}]})

"""

# Standard Library
import datetime
import logging
import os
from functools import lru_cache

# Database
from sqlalchemy import (
    Column,
    DateTime,
    Float,
    Integer,
    String,
    and_,
    create_engine,
    inspection,
    not_,
    or_,
    types,
)
from sqlalchemy.orm import declarative_base, sessionmaker

# This module
from .fileformat import file_digest


MYPY = False
if MYPY:
    from typing import Any, Dict, List, Tuple, Union  # noqa: F401

    FilterType = 'Dict[str, Any]'  # pragma: no cover


logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.sqlite'

# Accuracies recorded by train and recomputed by eval must agree this well.
ACCURACY_DRIFT = 1e-6

Base = declarative_base()


def _digest(path):
    return None if path is None else file_digest(path)


def _now():
    return datetime.datetime.now(datetime.timezone.utc)


class DatasetRecord(Base):
    __tablename__ = 'datasets'

    id = Column(Integer, primary_key=True, autoincrement=True)
    path = Column(String, nullable=False)
    sha256 = Column(String(64), nullable=False, index=True)
    task = Column(String(16), nullable=False)
    split = Column(String(16))
    images = Column(Integer, nullable=False)
    resolution = Column(Integer, nullable=False)
    seed = Column(Integer)
    noise = Column(String(16))
    created = Column(DateTime, default=_now)


class ModelRecord(Base):
    __tablename__ = 'models'

    id = Column(Integer, primary_key=True, autoincrement=True)
    path = Column(String, nullable=False)
    sha256 = Column(String(64), nullable=False, index=True)
    kind = Column(String(16), nullable=False)
    task = Column(String(16))
    dataset_sha256 = Column(String(64))
    val_dataset_sha256 = Column(String(64))
    n_components = Column(Integer)
    val_accuracy = Column(Float)
    created = Column(DateTime, default=_now)


class EvaluationRecord(Base):
    __tablename__ = 'evaluations'

    id = Column(Integer, primary_key=True, autoincrement=True)
    model_sha256 = Column(String(64), nullable=False, index=True)
    dataset_sha256 = Column(String(64), nullable=False, index=True)
    images = Column(Integer, nullable=False)
    average_accuracy = Column(Float)
    created = Column(DateTime, default=_now)


DELIMITER = '_'
RANGE_BEGIN = 'begin'
RANGE_END = 'end'


class ManifestFilter:
    """Translate filter dictionaries into SQLAlchemy clauses for one table."""

    model = None

    EQ = 'eq'
    NE = 'ne'
    LIKE = 'like'
    IS_NULL = 'is_null'
    IN = 'in'
    NOT_IN = 'not_in'
    LT = 'lt'
    LTE = 'lte'
    GT = 'gt'
    GTE = 'gte'
    RANGE = 'range'

    AND = 'and'
    OR = 'or'
    NOT = 'not'

    EXPRESSION_NAMES = {
        EQ: '',
        NE: NE,
        LIKE: LIKE,
        IS_NULL: IS_NULL,
        IN: IN,
        NOT_IN: NOT_IN,
        LT: LT,
        LTE: LTE,
        GT: GT,
        GTE: GTE,
        RANGE: RANGE,
    }

    ALLOWED_FILTERS = {
        types.String: [EQ, NE, LIKE, IN, NOT_IN],
        types.Integer: [EQ, LT, LTE, GT, GTE, NE, IN, NOT_IN, RANGE],
        types.Float: [EQ, LT, LTE, GT, GTE, NE, RANGE],
        types.DateTime: [EQ, LT, LTE, GT, GTE, NE, RANGE],
    }

    FILTER_FUNCTIONS = {
        EQ: lambda field, v: field == v,
        NE: lambda field, v: field != v,
        LIKE: lambda field, v: field.like(v),
        IS_NULL: lambda field, v: field.is_(None) if v else field.isnot(None),
        IN: lambda field, v: field.in_(v),
        NOT_IN: lambda field, v: field.notin_(v),
        LT: lambda field, v: field < v,
        LTE: lambda field, v: field <= v,
        GT: lambda field, v: field > v,
        GTE: lambda field, v: field >= v,
        RANGE: lambda field, v: field.between(v[RANGE_BEGIN], v[RANGE_END]),
    }

    @classmethod
    @lru_cache(maxsize=500)
    def _split_field(cls, key: str) -> 'Tuple[str, str]':
        """
        Get column name and expression.

        Args:
            key: Filter key, e.g. ``images_gte``.

        Returns:
            Column name and expression name.

        """
        by_length = sorted(
            cls.EXPRESSION_NAMES.items(), key=lambda x: -len(x[1])
        )
        for expression, name in by_length:
            if name and key.endswith(DELIMITER + name):
                return key[: -len(name) - 1], expression

        return key, cls.EQ

    @classmethod
    def _allowed(cls, column) -> 'List[str]':
        type_class = column.type.__class__
        for type_, expressions in cls.ALLOWED_FILTERS.items():
            if issubclass(type_class, type_):
                allowed = list(expressions)
                if column.nullable:
                    allowed.append(cls.IS_NULL)
                return allowed

        return [cls.EQ, cls.NE]

    @classmethod
    def _translate_filter(cls, key: str, value: 'Any'):
        if key == cls.AND:
            return cls._translate_many_filter(value, and_)

        if key == cls.OR:
            return cls._translate_many_filter(value, or_)

        if key == cls.NOT:
            return cls._translate_many_filter(
                value, lambda *x: not_(and_(*x))
            )

        field, expression = cls._split_field(key)
        columns = inspection.inspect(cls.model).columns
        if field not in columns and key in columns:
            # Column names may themselves end in an operator suffix.
            field, expression = key, cls.EQ
        if field not in columns:
            raise KeyError('Field not found: ' + field)
        column = columns[field]

        if expression not in cls._allowed(column):
            raise KeyError(
                'Operator "{}" not allowed for field {}'.format(
                    expression, field
                )
            )

        model_field = getattr(cls.model, field)
        return cls.FILTER_FUNCTIONS[expression](model_field, value)

    @classmethod
    def _translate_many_filter(
        cls, filters: 'Union[List[FilterType], FilterType]', join_by=None
    ):
        """
        Translate several filters.

        Args:
            filters: A filter dictionary, or a list of them for
                ``and``/``or``/``not``.
            join_by: Join translated filters.

        Returns:
            SQLAlchemy clause, or a list of clauses without ``join_by``.

        """
        result = []

        if isinstance(filters, list):
            for f in filters:
                local = cls._translate_many_filter(f, and_)
                if local is not None:
                    result.append(local)
        else:
            for key, value in filters.items():
                result.append(cls._translate_filter(key, value))

        if not result:
            return None

        if join_by is None:
            return result

        return join_by(*result)

    @classmethod
    def filter(cls, query, filters: 'FilterType'):
        """Return a new query with the filters ANDed to the existing set."""
        clauses = cls._translate_many_filter(filters)
        if clauses is not None:
            query = query.filter(*clauses)

        return query


class DatasetFilter(ManifestFilter):
    model = DatasetRecord


class ModelFilter(ManifestFilter):
    model = ModelRecord


class EvaluationFilter(ManifestFilter):
    model = EvaluationRecord


FILTER_SETS = {
    DatasetRecord: DatasetFilter,
    ModelRecord: ModelFilter,
    EvaluationRecord: EvaluationFilter,
}


class Manifest:
    """Session-bound access to one ``manifest.sqlite``."""

    def __init__(self, session):
        self.session = session

    @classmethod
    def open(cls, directory) -> 'Manifest':
        path = os.path.join(os.fspath(directory), MANIFEST_NAME)
        engine = create_engine('sqlite:///' + path)
        Base.metadata.create_all(engine)
        return cls(sessionmaker(bind=engine)())

    def close(self):
        self.session.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def _add(self, record):
        self.session.add(record)
        self.session.commit()
        return record

    def record_dataset(self, path, dataset) -> DatasetRecord:
        provenance = dataset.provenance
        noise = provenance.get('noise_preset')
        return self._add(
            DatasetRecord(
                path=os.fspath(path),
                sha256=file_digest(path),
                task=dataset.label_spec.task,
                split=provenance.get('split'),
                images=len(dataset),
                resolution=dataset.resolution,
                seed=provenance.get('seed'),
                noise=noise,
            )
        )

    def record_model(
        self,
        path,
        kind: str,
        task: str = None,
        dataset_path=None,
        val_dataset_path=None,
        n_components: int = None,
        val_accuracy: float = None,
    ) -> ModelRecord:
        return self._add(
            ModelRecord(
                path=os.fspath(path),
                sha256=file_digest(path),
                kind=kind,
                task=task,
                dataset_sha256=_digest(dataset_path),
                val_dataset_sha256=_digest(val_dataset_path),
                n_components=n_components,
                val_accuracy=val_accuracy,
            )
        )

    def record_evaluation(
        self, model_path, dataset_path, images: int, accuracy: float
    ) -> EvaluationRecord:
        return self._add(
            EvaluationRecord(
                model_sha256=file_digest(model_path),
                dataset_sha256=file_digest(dataset_path),
                images=images,
                average_accuracy=accuracy,
            )
        )

    def find(self, record, filters: 'FilterType' = None) -> list:
        """All records of one table matching a filter dictionary."""
        query = self.session.query(record)
        if filters:
            query = FILTER_SETS[record].filter(query, filters)
        return query.order_by(record.id).all()

    def recorded_accuracy(self, model_path, dataset_path):
        """
        Accuracy stored for this exact model and validation file, if any.

        Returns:
            The most recent matching value, or None.

        """
        matches = self.find(
            ModelRecord,
            {
                'sha256': file_digest(model_path),
                'val_dataset_sha256': file_digest(dataset_path),
                'val_accuracy_is_null': False,
            },
        )
        if not matches:
            return None
        return matches[-1].val_accuracy

    def check_drift(self, model_path, dataset_path, accuracy: float) -> bool:
        """Warn when an evaluation disagrees with the training record."""
        expected = self.recorded_accuracy(model_path, dataset_path)
        if expected is None:
            return False

        drift = abs(expected - accuracy)
        if drift > ACCURACY_DRIFT:
            logger.warning(
                'Accuracy %.6f differs from the recorded %.6f by %.3g',
                accuracy,
                expected,
                drift,
            )
            return True
        return False
