def test_version_present():
    import comprestore

    assert hasattr(comprestore, "__version__")
    assert isinstance(comprestore.__version__, str)
    assert len(comprestore.__version__) > 0
