"""Blob, table and publish-subscribe services with local backends, and the IO tasks."""

from .backends import (
    BlobStore,
    Directory,
    PubSubBroker,
    ServiceBackends,
    Subscription,
    TableStore,
    zip_bytes,
    zip_files,
)

__all__ = [
    "BlobStore",
    "Directory",
    "PubSubBroker",
    "ServiceBackends",
    "Subscription",
    "TableStore",
    "zip_bytes",
    "zip_files",
]
