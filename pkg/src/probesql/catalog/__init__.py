"""Dataset loading, schema introspection, and the stored-value index."""

from .dataset import Dataset, QuestionRecord, load_dataset
from .schema import (
    ColumnDescription, ColumnInfo, DatabaseCatalog, ForeignKey, TableInfo,
    build_catalog, collect_value_examples, introspect_schema, is_textual,
    load_descriptions,
)
from .value_index import (
    IndexConfig, SkipEntry, ValueIndex, build_value_index, jaccard,
    minhash_signature, normalize, shingles,
)
