import os
import tempfile

from django.core.files.base import ContentFile
from django.core.files.storage import FileSystemStorage


class ArtifactStorage(FileSystemStorage):
    """Run artifacts (CSV, SVG, manifest) under one output directory.

    Files are written to a temporary name in the target directory and moved
    into place with os.replace.
    """

    def get_available_name(self, name, max_length=None):
        # Same name means same artifact: overwrite instead of suffixing.
        return name

    def _save(self, name, content):
        full_path = self.path(name)
        directory = os.path.dirname(full_path)
        os.makedirs(directory, exist_ok=True)

        fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix=os.path.basename(name))
        try:
            with os.fdopen(fd, 'wb') as handle:
                for chunk in content.chunks():
                    handle.write(chunk.encode('utf-8') if isinstance(chunk, str) else chunk)
            os.replace(tmp_path, full_path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise
        return name

    def write_text(self, name, text):
        return self.save(name, ContentFile(text.encode('utf-8')))

    def write_bytes(self, name, data):
        return self.save(name, ContentFile(data))
