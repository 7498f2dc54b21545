from .fixtures import (
    backend_config,
    dictionary_path,
    journal,
    mock_backend,
    panel,
    sections,
    segmenter,
    stopwords,
)
