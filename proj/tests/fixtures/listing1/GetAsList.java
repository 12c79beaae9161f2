package fixtures;

import java.util.ArrayList;
import java.util.List;

class Headers {
    <T> List<T> getAsList(T value) {
        if (value == null)
            return null;
        List<T> result = new ArrayList<T>();
        result.add(value);
        return result;
    }
}
